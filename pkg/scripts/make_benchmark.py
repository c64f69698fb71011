#!/usr/bin/env python3
"""Generate the synthetic benchmarks used in the experiments.

Writes three directories under the output root: a skewed star, a mixed
star/chain layout, and a key-correlated two-table setup, each with a small
workload file next to the schema.
"""
import argparse
import os

from tkhist.synth import SyntheticSpec, generate_synthetic, write_benchmark

STAR_WORKLOAD = """\
-- skewed star joins
SELECT COUNT(*) FROM t1, t2 WHERE t1.k1 = t2.k1
SELECT COUNT(*) FROM t1, t2, t3 WHERE t1.k1 = t2.k1 AND t1.k1 = t3.k1
SELECT COUNT(*) FROM t1, t2 WHERE t1.k1 = t2.k1 AND t1.y <= 300
"""

MIXED_WORKLOAD = """\
-- star plus chain
SELECT COUNT(*) FROM t1, t2, t3 WHERE t2.k1 = t1.k1 AND t3.k1 = t1.k1
SELECT COUNT(*) FROM t3, t4 WHERE t4.k2 = t3.k2
SELECT COUNT(*) FROM t1, t3, t4 WHERE t3.k1 = t1.k1 AND t4.k2 = t3.k2
SELECT COUNT(*) FROM t1, t2, t3, t4, t5 WHERE t2.k1 = t1.k1 AND t3.k1 = t1.k1 AND t4.k2 = t3.k2 AND t5.k3 = t4.k3
"""

CORR_WORKLOAD = """\
-- filters correlated with heavy join keys
SELECT COUNT(*) FROM t1, t2 WHERE t1.k1 = t2.k1 AND t1.y >= 100
SELECT COUNT(*) FROM t1, t2 WHERE t1.k1 = t2.k1 AND t1.y <= 5
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="benchmarks")
    ap.add_argument("--rows", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    setups = [
        ("star", SyntheticSpec(tables=3, rows=args.rows, layout="star",
                               skew=1.2), STAR_WORKLOAD),
        ("mixed", SyntheticSpec(tables=5, rows=args.rows, layout="mixed",
                                skew=1.0), MIXED_WORKLOAD),
        ("correlated", SyntheticSpec(tables=2, rows=args.rows, layout="star",
                                     skew=1.4, correlated=True), CORR_WORKLOAD),
    ]
    for name, spec, workload in setups:
        outdir = os.path.join(args.out, name)
        schema, tables = generate_synthetic(spec, seed=args.seed)
        write_benchmark(schema, tables, outdir)
        with open(os.path.join(outdir, "workload.txt"), "w") as fh:
            fh.write(workload)
        print(f"{name}: {outdir}")


if __name__ == "__main__":
    main()
