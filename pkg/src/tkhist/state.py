"""Built estimator state: every histogram for a schema, plus (de)serialization.

The state file is a single self-describing JSON document.  All counts are
exact integers and every collection is written in sorted order, so saving the
same state twice is byte-identical.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import catalog, histcore
from .catalog import KeyDomain, Schema, TableData, split_qualified
from .errors import StateError
from .histcore import (AttrBinning, Bin1D, TKHist1D, TKHist2D,
                       build_frequency_hist, build_tkhist1d, build_tkhist2d,
                       categorical_binning, domain_binning, numeric_binning)

STATE_MAGIC = "TKHIST-STATE-v1"
STATE_VERSION = 1

DEFAULT_BIN_COUNT = 200
DEFAULT_TOP_K = 20


@dataclass
class BuildConfig:
    bin_count: int = DEFAULT_BIN_COUNT
    top_k: int = DEFAULT_TOP_K
    attr_bin_count: int | None = None  # defaults to bin_count
    categorical_threshold: int | None = None  # defaults to the schema's value
    correlation_cap: int = 1000  # dominant keys kept per domain during discovery

    @property
    def attr_bins(self) -> int:
        return self.attr_bin_count if self.attr_bin_count else self.bin_count


@dataclass
class EstimatorState:
    schema: Schema
    config: BuildConfig
    domains: dict[str, KeyDomain]
    column_domain: dict[str, str]  # "table.column" -> domain id
    hists1d: dict[tuple[str, str], TKHist1D]
    hists2d: dict[tuple[str, str, str], TKHist2D]
    freq_hists: dict[tuple[str, str], dict]
    column_class: dict[tuple[str, str], str]
    table_rows: dict[str, int]
    correlations: dict | None = None  # see djpcd.CorrelationMap.entries

    def domain_of(self, table: str, column: str) -> str | None:
        return self.column_domain.get(f"{table}.{column}")

    def key_columns(self, table: str) -> list[str]:
        tdef = self.schema.table(table)
        return [c.name for c in tdef.columns
                if f"{table}.{c.name}" in self.column_domain]


def build_state(schema: Schema, tables: dict[str, TableData],
                config: BuildConfig | None = None) -> EstimatorState:
    """Build all histograms for a schema over already-ingested table data.

    Correlation discovery is a separate pass (estimator.discover_correlations)
    because it re-runs the join pipeline over the longest templates.
    """
    config = config or BuildConfig()
    threshold = (config.categorical_threshold
                 if config.categorical_threshold is not None
                 else schema.categorical_threshold)

    domains = {d.id: d for d in catalog.infer_key_domains(schema)}
    catalog.set_domain_boundaries(list(domains.values()), tables,
                                  config.bin_count)
    column_domain = {c: d.id for d in domains.values() for c in d.columns}

    column_class: dict[tuple[str, str], str] = {}
    hists1d: dict[tuple[str, str], TKHist1D] = {}
    hists2d: dict[tuple[str, str, str], TKHist2D] = {}
    freq_hists: dict[tuple[str, str], dict] = {}
    table_rows: dict[str, int] = {}

    for tdef in schema.tables:
        data = tables[tdef.name]
        table_rows[tdef.name] = data.row_count
        for name, cls in catalog.classify_columns(data, tdef, threshold).items():
            column_class[(tdef.name, name)] = cls
        # orphan key columns (no FK edge) behave like numeric attributes
        for cdef in tdef.columns:
            if (cdef.role == catalog.ROLE_KEY
                    and f"{tdef.name}.{cdef.name}" not in column_domain):
                column_class[(tdef.name, cdef.name)] = "numeric"

        key_cols = [c.name for c in tdef.columns
                    if f"{tdef.name}.{c.name}" in column_domain]
        for kc in key_cols:
            dom = domains[column_domain[f"{tdef.name}.{kc}"]]
            hists1d[(tdef.name, kc)] = build_tkhist1d(
                data.columns[kc], dom, config.top_k,
                null_mask=data.null_mask[kc])
            for cdef in tdef.columns:
                if cdef.name == kc:
                    continue
                binning = _attr_binning(tdef.name, cdef, data, domains,
                                        column_domain, column_class, config)
                hists2d[(tdef.name, kc, cdef.name)] = build_tkhist2d(
                    data.columns[kc], data.columns[cdef.name], dom, binning,
                    key_nulls=data.null_mask[kc],
                    attr_nulls=data.null_mask[cdef.name])

        for cdef in tdef.columns:
            if column_class.get((tdef.name, cdef.name)) == "categorical":
                freq_hists[(tdef.name, cdef.name)] = build_frequency_hist(
                    data.columns[cdef.name], data.null_mask[cdef.name])

    return EstimatorState(
        schema=schema, config=config, domains=domains,
        column_domain=column_domain, hists1d=hists1d, hists2d=hists2d,
        freq_hists=freq_hists, column_class=column_class,
        table_rows=table_rows, correlations=None)


def _attr_binning(table: str, cdef, data: TableData, domains, column_domain,
                  column_class, config: BuildConfig) -> AttrBinning:
    qual = f"{table}.{cdef.name}"
    if qual in column_domain:
        return domain_binning(domains[column_domain[qual]],
                              integer=cdef.kind == catalog.KIND_INTEGER)
    if column_class.get((table, cdef.name)) == "categorical":
        return categorical_binning(data.non_null(cdef.name))
    return numeric_binning(data.non_null(cdef.name), config.attr_bins,
                           integer=cdef.kind == catalog.KIND_INTEGER)


def ingest_all(schema: Schema) -> dict[str, TableData]:
    return {t.name: catalog.ingest_table(t, schema) for t in schema.tables}


# ---------------------------------------------------------------------------
# serialization

def _domain_doc(d: KeyDomain) -> dict:
    return {"columns": sorted(d.columns), "lo": d.lo, "hi": d.hi,
            "bin_count": d.bin_count}


def _hist1d_doc(h: TKHist1D) -> dict:
    bins = []
    for b in h.bins:
        topk = sorted(b.topk.items(), key=lambda kv: (-kv[1], kv[0]))
        bins.append({"topk": [[k, c] for k, c in topk],
                     "nv": b.nv,
                     "background": sorted(b.background)})
    return {"domain": h.domain.id, "k": h.k, "total_rows": h.total_rows,
            "bins": bins}


def _binning_doc(a: AttrBinning) -> dict:
    doc: dict = {"kind": a.kind, "integer": a.integer}
    if a.kind == "categorical":
        doc["values"] = list(a.values)
    else:
        doc["boundaries"] = [float(x) for x in a.boundaries]
        doc["attr_domain"] = a.attr_domain_id
    return doc


def _env_doc(env) -> list:
    if env[0] == "range":
        return ["range", env[1], env[2]]
    return ["set", sorted(env[1])]


def state_to_document(state: EstimatorState) -> dict:
    corr = None
    if state.correlations is not None:
        corr = {}
        for (table, dom, attr), env_by_key in sorted(state.correlations.items()):
            corr[f"{table}|{dom}|{attr}"] = [
                [k] + _env_doc(env) for k, env in sorted(env_by_key.items())]
    return {
        "magic": STATE_MAGIC,
        "version": STATE_VERSION,
        "config": {
            "bin_count": state.config.bin_count,
            "top_k": state.config.top_k,
            "attr_bin_count": state.config.attr_bin_count,
            "categorical_threshold": state.config.categorical_threshold,
            "correlation_cap": state.config.correlation_cap,
        },
        "schema": state.schema.document,
        "schema_base_dir": state.schema.base_dir,
        "domains": {d.id: _domain_doc(d) for d in state.domains.values()},
        "hists1d": {f"{t}.{c}": _hist1d_doc(h)
                    for (t, c), h in sorted(state.hists1d.items())},
        "hists2d": {f"{t}.{c}|{a}": {
                        "domain": h.key_domain.id,
                        "attr": _binning_doc(h.attr),
                        "grid": h.grid.tolist()}
                    for (t, c, a), h in sorted(state.hists2d.items())},
        "freq": {f"{t}.{c}": sorted(fh.items(), key=lambda kv: repr(kv[0]))
                 for (t, c), fh in sorted(state.freq_hists.items())},
        "column_class": {f"{t}.{c}": cls
                         for (t, c), cls in sorted(state.column_class.items())},
        "table_rows": dict(sorted(state.table_rows.items())),
        "correlations": corr,
    }


def save_state(state: EstimatorState, path: str) -> int:
    """Atomically write the state file; returns its size in bytes."""
    payload = json.dumps(state_to_document(state), sort_keys=True,
                         separators=(",", ":")).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tkhist-state-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return len(payload)


def load_state(path: str) -> EstimatorState:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise StateError(f"cannot read state file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StateError(f"corrupt state file {path!r}: {exc}") from exc
    return state_from_document(doc)


def state_from_document(doc: dict) -> EstimatorState:
    if not isinstance(doc, dict) or doc.get("magic") != STATE_MAGIC:
        raise StateError("unrecognized state file")
    if doc.get("version") != STATE_VERSION:
        raise StateError(f"unsupported state version {doc.get('version')!r}")

    cdoc = doc["config"]
    config = BuildConfig(bin_count=cdoc["bin_count"], top_k=cdoc["top_k"],
                         attr_bin_count=cdoc["attr_bin_count"],
                         categorical_threshold=cdoc["categorical_threshold"],
                         correlation_cap=cdoc["correlation_cap"])
    schema = catalog.schema_from_document(doc["schema"],
                                          base_dir=doc.get("schema_base_dir", "."))

    domains: dict[str, KeyDomain] = {}
    for did, d in doc["domains"].items():
        dom = KeyDomain(id=did, columns=frozenset(d["columns"]))
        dom.set_boundaries(d["lo"], d["hi"], d["bin_count"])
        domains[did] = dom
    column_domain = {c: d.id for d in domains.values() for c in d.columns}

    hists1d = {}
    for qual, h in doc["hists1d"].items():
        t, c = split_qualified(qual)
        bins = [Bin1D(topk={_key(k): cnt for k, cnt in b["topk"]},
                      nv=b["nv"],
                      background=set(b["background"]))
                for b in h["bins"]]
        hists1d[(t, c)] = TKHist1D(domain=domains[h["domain"]], bins=bins,
                                   total_rows=h["total_rows"], k=h["k"])

    hists2d = {}
    for name, h in doc["hists2d"].items():
        qual, attr = name.split("|", 1)
        t, c = split_qualified(qual)
        binning = _binning_from_doc(h["attr"])
        dom = domains[h["domain"]]
        hists2d[(t, c, attr)] = TKHist2D(
            key_domain=dom, attr=binning,
            grid=np.asarray(h["grid"], dtype=np.int64).reshape(
                dom.bin_count, binning.n_bins))

    freq = {}
    for qual, items in doc["freq"].items():
        t, c = split_qualified(qual)
        freq[(t, c)] = {v: cnt for v, cnt in items}

    column_class = {}
    for qual, cls in doc["column_class"].items():
        t, c = split_qualified(qual)
        column_class[(t, c)] = cls

    correlations = None
    if doc.get("correlations") is not None:
        correlations = {}
        for name, rows in doc["correlations"].items():
            table, dom, attr = name.split("|", 2)
            env_by_key = {}
            for row in rows:
                key, tag = row[0], row[1]
                if tag == "range":
                    env_by_key[_key(key)] = ("range", row[2], row[3])
                else:
                    env_by_key[_key(key)] = ("set", frozenset(row[2]))
            correlations[(table, dom, attr)] = env_by_key

    return EstimatorState(schema=schema, config=config, domains=domains,
                          column_domain=column_domain, hists1d=hists1d,
                          hists2d=hists2d, freq_hists=freq,
                          column_class=column_class,
                          table_rows=doc["table_rows"],
                          correlations=correlations)


def _key(k):
    # JSON round-trips ints and floats losslessly; nothing to normalize
    return k


def _binning_from_doc(doc: dict) -> AttrBinning:
    if doc["kind"] == "categorical":
        return AttrBinning(kind="categorical", integer=doc["integer"],
                           values=list(doc["values"]))
    return AttrBinning(kind="numeric", integer=doc["integer"],
                       boundaries=np.asarray(doc["boundaries"], dtype=np.float64),
                       attr_domain_id=doc.get("attr_domain"))
