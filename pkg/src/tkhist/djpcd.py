"""Correlation between dominant join keys and filter attributes.

Offline, the join pipeline is run over the longest declared join templates;
the keys carried by the resulting dominant maps are the join paths worth
tracking.  For each table and filterable attribute we then record, per
dominant key, the envelope of attribute values observed with that key
(min/max for ordered columns, the exact value set for categorical ones).

Online, a dominant key is excluded from a query's join when its envelope
cannot intersect a predicate's satisfying set.  Envelope disjointness implies
no row with that key satisfies the filter, so exclusion never removes true
result mass.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .catalog import Schema, TableData, split_qualified
from .joinengine import CompositeHist
from .predicate import Predicate, matches
from .queryfront import Query

# envelope forms: ("range", lo, hi) | ("set", frozenset)


def collect_dominant_keys(group_composites: list[CompositeHist],
                          cap: int) -> dict[str, set]:
    """Union dominant-map keys per domain, keeping the `cap` largest
    contributors per domain."""
    weight: dict[str, dict] = defaultdict(lambda: defaultdict(float))
    for comp in group_composites:
        per_dom = weight[comp.domain.id]
        for b in comp.bins:
            for key, est in b.dominant.items():
                per_dom[key] += est
    out = {}
    for dom, per_key in weight.items():
        ranked = sorted(per_key.items(), key=lambda kv: (-kv[1], repr(kv[0])))
        out[dom] = {k for k, _ in ranked[:cap]}
    return out


def build_correlation_map(schema: Schema,
                          tables: dict[str, TableData],
                          column_domain: dict[str, str],
                          column_class: dict[tuple[str, str], str],
                          dominant_by_domain: dict[str, set]) -> dict:
    """Scan each table's rows carrying dominant keys and record per-key
    attribute envelopes.  Returns {(table, domain_id, attr): {key: env}}."""
    cmap: dict[tuple[str, str, str], dict] = {}
    for tdef in schema.tables:
        data = tables[tdef.name]
        key_cols = [(c.name, column_domain[f"{tdef.name}.{c.name}"])
                    for c in tdef.columns
                    if f"{tdef.name}.{c.name}" in column_domain]
        for kc, dom in key_cols:
            dominant = dominant_by_domain.get(dom)
            if not dominant:
                continue
            kvals = data.columns[kc]
            kmask = data.null_mask[kc]
            hit = np.array([(not kmask[i]) and _scalar(kvals[i]) in dominant
                            for i in range(data.row_count)], dtype=bool)
            if not hit.any():
                continue
            for cdef in tdef.columns:
                if cdef.name == kc:
                    continue
                env_by_key = _scan_attribute(
                    data, kc, cdef.name, hit,
                    categorical=column_class.get(
                        (tdef.name, cdef.name)) == "categorical"
                    and data.columns[cdef.name].dtype == object)
                if env_by_key:
                    cmap[(tdef.name, dom, cdef.name)] = env_by_key
    return cmap


def _scalar(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _scan_attribute(data: TableData, key_col: str, attr_col: str,
                    hit: np.ndarray, categorical: bool) -> dict:
    env_by_key: dict = {}
    kvals = data.columns[key_col]
    avals = data.columns[attr_col]
    amask = data.null_mask[attr_col]
    for i in np.flatnonzero(hit):
        if amask[i]:
            continue
        key = _scalar(kvals[i])
        a = _scalar(avals[i])
        if categorical:
            env = env_by_key.setdefault(key, ("set", set()))
            env[1].add(a)
        else:
            prev = env_by_key.get(key)
            if prev is None:
                env_by_key[key] = ("range", a, a)
            else:
                env_by_key[key] = ("range", min(prev[1], a), max(prev[2], a))
    if categorical:
        env_by_key = {k: ("set", frozenset(v)) for k, (_, v) in env_by_key.items()}
    return env_by_key


def envelope_excludes(env, pred: Predicate, min_only: bool = False) -> bool:
    """True iff no value inside the envelope can satisfy the predicate.

    `min_only` reproduces the minimum-value-only encoding: the recorded
    maximum is ignored (treated as unbounded), which decides upper-bound
    predicates and leaves lower-bound ones conservative.
    """
    if env[0] == "set":
        return not any(matches(pred, v) for v in env[1])
    lo, hi = env[1], env[2]
    if min_only:
        hi = float("inf")
    op, val = pred.op, pred.value
    if op == "=":
        return val < lo or val > hi
    if op == "<":
        return lo >= val
    if op == "<=":
        return lo > val
    if op == ">":
        return hi <= val
    if op == ">=":
        return hi < val
    if op == "between":
        a, b = val
        return hi < a or lo > b
    if op == "in":
        return not any(lo <= v <= hi for v in val)
    return False


def find_excluded_keys(query: Query, correlations: dict,
                       column_domain: dict[str, str],
                       min_only: bool = False) -> dict[str, frozenset]:
    """Per key domain, dominant keys whose envelopes reject some predicate.

    Exclusions union across predicates; attributes absent from the map
    contribute none.
    """
    if not correlations:
        return {}
    excluded: dict[str, set] = defaultdict(set)
    for pred in query.predicates:
        alias, attr = pred.column.split(".", 1)
        table = query.aliases[alias]
        for (tbl, dom, att), env_by_key in correlations.items():
            if tbl != table or att != attr:
                continue
            for key, env in env_by_key.items():
                if envelope_excludes(env, pred, min_only=min_only):
                    excluded[dom].add(key)
    return {dom: frozenset(keys) for dom, keys in excluded.items()}
