"""Command-line interface.

Subcommands: build, estimate, evaluate, update, sweep, synth.  The state file
path defaults to the TKHIST_STATE environment variable when --state is
omitted.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import catalog, estimator, synth
from .errors import DomainBoundsError, TKHistError
from .state import (BuildConfig, build_state, ingest_all, load_state,
                    save_state)

STATE_ENV = "TKHIST_STATE"


def _state_path(args) -> str:
    path = args.state or os.environ.get(STATE_ENV)
    if not path:
        raise TKHistError(
            f"no state file given (use --state or ${STATE_ENV})")
    return path


def _add_state_arg(p):
    p.add_argument("--state", default=None,
                   help=f"state file path (default: ${STATE_ENV})")


def _add_djpcd_arg(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--djpcd", dest="djpcd", action="store_true", default=True,
                   help="use correlation-based key exclusion (default)")
    g.add_argument("--no-djpcd", dest="djpcd", action="store_false")


def cmd_build(args) -> int:
    schema = catalog.load_schema(args.schema)
    tables = ingest_all(schema)
    config = BuildConfig(bin_count=args.bins, top_k=args.k,
                         attr_bin_count=args.attr_bins,
                         categorical_threshold=args.threshold,
                         correlation_cap=args.correlation_cap)
    t0 = time.perf_counter()
    state = build_state(schema, tables, config)
    if args.djpcd:
        estimator.discover_correlations(state, tables)
    build_s = time.perf_counter() - t0
    size = save_state(state, _state_path(args))
    print(f"built {len(schema.tables)} tables, {len(state.domains)} key "
          f"domains in {build_s:.2f}s; state file {size} bytes")
    return 0


def cmd_estimate(args) -> int:
    state = load_state(_state_path(args))
    rep = estimator.estimate(args.sql, state, use_djpcd=args.djpcd)
    if args.truth is not None:
        rep.truth = args.truth
        if args.truth > 0:
            rep.q_error = estimator.q_error(rep.estimate, args.truth)
            rep.ratio = estimator.ratio(rep.estimate, args.truth)
    print(json.dumps(rep.to_dict()))
    return 0


def cmd_evaluate(args) -> int:
    state = load_state(_state_path(args))
    entries = estimator.parse_workload(args.workload)
    tables = None
    if args.oracle:
        tables = ingest_all(state.schema)
    reports, summary = estimator.evaluate_workload(
        state, entries, use_djpcd=args.djpcd, tables=tables,
        oracle_cap=args.oracle_cap)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rep in reports:
            out.write(json.dumps(rep.to_dict()) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            d = summary.to_dict()
            writer.writerow(d.keys())
            writer.writerow(d.values())
    print(json.dumps({"summary": summary.to_dict()}), file=sys.stderr)
    return 1 if summary.failed else 0


def cmd_update(args) -> int:
    state = load_state(_state_path(args))
    tdef = state.schema.table(args.table)
    data = catalog.ingest_table(tdef, state.schema, path=args.csv)
    key_cols = state.key_columns(args.table)
    inserted = rejected = 0
    for i in range(data.row_count):
        # a row is accepted only if every key value fits its domain bins
        ok = True
        for kc in key_cols:
            if data.null_mask[kc][i]:
                continue
            dom = state.domains[state.column_domain[f"{args.table}.{kc}"]]
            try:
                dom.bin_of(data.columns[kc][i])
            except DomainBoundsError:
                ok = False
                break
        if not ok:
            rejected += 1
            continue
        inserted += 1
        state.table_rows[args.table] += 1
        for kc in key_cols:
            if data.null_mask[kc][i]:
                continue
            kv = data.columns[kc][i]
            state.hists1d[(args.table, kc)].insert(kv)
            for cdef in tdef.columns:
                if cdef.name == kc or data.null_mask[cdef.name][i]:
                    continue
                state.hists2d[(args.table, kc, cdef.name)].insert(
                    kv, data.columns[cdef.name][i])
        for cdef in tdef.columns:
            fh = state.freq_hists.get((args.table, cdef.name))
            if fh is not None and not data.null_mask[cdef.name][i]:
                v = data.columns[cdef.name][i]
                v = int(v) if isinstance(v, np.integer) else v
                fh[v] = fh.get(v, 0) + 1
    size = save_state(state, _state_path(args))
    print(f"inserted {inserted} rows, rejected {rejected} "
          f"(out-of-range key); state file {size} bytes")
    return 0


def cmd_sweep(args) -> int:
    schema = catalog.load_schema(args.schema)
    tables = ingest_all(schema)
    entries = estimator.parse_workload(args.workload)
    bins = [int(x) for x in args.bins.split(",")]
    ks = [int(x) for x in args.k.split(",")]
    points = estimator.sweep(schema, tables, entries, bins, ks,
                             use_djpcd=args.djpcd)
    rows = [["bin_count", "top_k", "build_seconds", "state_bytes",
             "median_q", "mean_latency_ms"]]
    for p in points:
        rows.append([p.bin_count, p.top_k, f"{p.build_seconds:.4f}",
                     p.state_bytes,
                     "" if p.median_q is None else f"{p.median_q:.4f}",
                     f"{p.mean_latency_ms:.3f}"])
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_synth(args) -> int:
    spec = synth.SyntheticSpec(tables=args.tables, rows=args.rows,
                               layout=args.layout, skew=args.skew,
                               distinct_keys=args.distinct,
                               correlated=args.correlated)
    schema, tables = synth.generate_synthetic(spec, seed=args.seed)
    path = synth.write_benchmark(schema, tables, args.out)
    print(f"wrote {len(schema.tables)} tables to {args.out} (schema: {path})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tkhist",
                                 description="top-k histogram cardinality "
                                             "estimation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build histograms from schema + CSVs")
    p.add_argument("--schema", required=True)
    _add_state_arg(p)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--attr-bins", type=int, default=None)
    p.add_argument("--threshold", type=int, default=None,
                   help="categorical distinct-count threshold")
    p.add_argument("--correlation-cap", type=int, default=1000)
    _add_djpcd_arg(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("estimate", help="estimate one COUNT(*) query")
    _add_state_arg(p)
    p.add_argument("sql")
    p.add_argument("--truth", type=float, default=None)
    _add_djpcd_arg(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="estimate a workload file")
    _add_state_arg(p)
    p.add_argument("--workload", required=True)
    p.add_argument("--out", default=None, help="JSON-lines report path")
    p.add_argument("--summary", default=None, help="CSV summary path")
    p.add_argument("--oracle", action="store_true",
                   help="compute missing truths with the exact join oracle")
    p.add_argument("--oracle-cap", type=int, default=None)
    _add_djpcd_arg(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("update", help="stream new rows into an existing state")
    _add_state_arg(p)
    p.add_argument("--table", required=True)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("sweep", help="rebuild/evaluate over a (bins, k) grid")
    p.add_argument("--schema", required=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--bins", default="25,50,100,200")
    p.add_argument("--k", default="0,5,20")
    p.add_argument("--out", default=None)
    p.add_argument("--djpcd", dest="djpcd", action="store_true", default=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--tables", type=int, default=3)
    p.add_argument("--rows", type=int, default=10_000)
    p.add_argument("--layout", choices=["star", "chain", "mixed"],
                   default="star")
    p.add_argument("--skew", type=float, default=1.2)
    p.add_argument("--distinct", type=int, default=1000)
    p.add_argument("--correlated", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TKHistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
