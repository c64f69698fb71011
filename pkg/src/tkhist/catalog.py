"""Schema loading, CSV ingestion, column classification, and key-domain inference.

A key domain is the equivalence class of columns connected by primary/foreign
key edges.  All histograms over one domain share the same equi-width bin
boundaries, so bin-aligned join estimation never needs cross-bin interpolation.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainBoundsError, IngestError, SchemaError

KIND_INTEGER = "integer"
KIND_REAL = "real"
KIND_CATEGORICAL = "categorical"
VALID_KINDS = (KIND_INTEGER, KIND_REAL, KIND_CATEGORICAL)

ROLE_KEY = "key"
ROLE_ATTRIBUTE = "attribute"

DEFAULT_CATEGORICAL_THRESHOLD = 1000


@dataclass(frozen=True)
class ColumnDef:
    name: str
    kind: str
    role: str
    categorical: bool = False  # manual override, wins over inference


@dataclass(frozen=True)
class TableDef:
    name: str
    source: str
    columns: tuple[ColumnDef, ...]
    primary_key: str | None = None

    def column(self, name: str) -> ColumnDef:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"table {self.name!r} has no column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)


@dataclass
class Schema:
    tables: list[TableDef]
    foreign_keys: list[tuple[str, str]]
    categorical_threshold: int = DEFAULT_CATEGORICAL_THRESHOLD
    templates: list[list[tuple[str, str]]] = field(default_factory=list)
    base_dir: str = "."
    document: dict = field(default_factory=dict)

    def table(self, name: str) -> TableDef:
        for t in self.tables:
            if t.name == name:
                return t
        raise SchemaError(f"unknown table {name!r}")

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)

    def column_kind(self, qualified: str) -> str:
        tname, cname = split_qualified(qualified)
        return self.table(tname).column(cname).kind


def split_qualified(qualified: str) -> tuple[str, str]:
    parts = qualified.split(".")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise SchemaError(f"expected table.column, got {qualified!r}")
    return parts[0], parts[1]


def _parse_template_edge(edge: str) -> tuple[str, str]:
    sides = edge.split("=")
    if len(sides) != 2:
        raise SchemaError(f"template edge {edge!r} is not of the form t1.c=t2.c")
    return sides[0].strip(), sides[1].strip()


def load_schema(path: str) -> Schema:
    """Load and validate a schema document (UTF-8 JSON)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file {path!r} is not valid JSON: {exc}") from exc
    schema = schema_from_document(doc, base_dir=os.path.dirname(os.path.abspath(path)))
    return schema


def schema_from_document(doc: dict, base_dir: str = ".") -> Schema:
    if not isinstance(doc, dict) or "tables" not in doc:
        raise SchemaError("schema document must be an object with a 'tables' list")

    tables = []
    for tdoc in doc["tables"]:
        cols = []
        seen = set()
        for cdoc in tdoc.get("columns", []):
            name = cdoc["name"]
            if name in seen:
                raise SchemaError(
                    f"duplicate column {name!r} in table {tdoc['name']!r}")
            seen.add(name)
            kind = cdoc.get("kind", KIND_INTEGER)
            if kind not in VALID_KINDS:
                raise SchemaError(f"unknown column kind {kind!r}")
            role = cdoc.get("role", ROLE_ATTRIBUTE)
            if role not in (ROLE_KEY, ROLE_ATTRIBUTE):
                raise SchemaError(f"unknown column role {role!r}")
            cols.append(ColumnDef(name=name, kind=kind, role=role,
                                  categorical=bool(cdoc.get("categorical", False))))
        tables.append(TableDef(name=tdoc["name"], source=tdoc.get("file", ""),
                               columns=tuple(cols),
                               primary_key=tdoc.get("primary_key")))

    schema = Schema(
        tables=tables,
        foreign_keys=[],
        categorical_threshold=int(doc.get("categorical_threshold",
                                          DEFAULT_CATEGORICAL_THRESHOLD)),
        base_dir=base_dir,
        document=doc,
    )
    if schema.categorical_threshold < 1:
        raise SchemaError("categorical_threshold must be >= 1")

    for fk in doc.get("foreign_keys", []):
        frm, to = fk["from"], fk["to"]
        for endpoint in (frm, to):
            tname, cname = split_qualified(endpoint)
            if not schema.has_table(tname) or not schema.table(tname).has_column(cname):
                raise SchemaError(f"dangling foreign key: {endpoint!r} does not exist")
        schema.foreign_keys.append((frm, to))

    for template in doc.get("templates", []):
        edges = []
        for edge in template:
            a, b = _parse_template_edge(edge)
            for endpoint in (a, b):
                tname, cname = split_qualified(endpoint)
                if not schema.has_table(tname) or not schema.table(tname).has_column(cname):
                    raise SchemaError(
                        f"template references missing column {endpoint!r}")
            edges.append((a, b))
        _check_template_acyclic(edges)
        schema.templates.append(edges)

    return schema


def _check_template_acyclic(edges: list[tuple[str, str]]) -> None:
    parent: dict[str, str] = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    for a, b in edges:
        ta, tb = a.split(".")[0], b.split(".")[0]
        ra, rb = find(ta), find(tb)
        if ra == rb:
            raise SchemaError(f"cyclic template: edge {a}={b} closes a cycle")
        parent.setdefault(ra, ra)
        parent[ra] = rb


@dataclass
class TableData:
    """Columnar table contents with per-column null masks."""

    name: str
    columns: dict[str, np.ndarray]
    null_mask: dict[str, np.ndarray]
    row_count: int

    def non_null(self, column: str) -> np.ndarray:
        return self.columns[column][~self.null_mask[column]]

    def distinct_count(self, column: str) -> int:
        vals = self.non_null(column)
        if len(vals) == 0:
            return 0
        return len(np.unique(vals)) if vals.dtype != object else len(set(vals.tolist()))


def ingest_table(tdef: TableDef, schema: Schema, path: str | None = None) -> TableData:
    """Read a table's CSV into columnar arrays.

    The header row must contain exactly the declared columns.  Empty cells are
    recorded as nulls; an unparseable cell is an error naming row and column.
    """
    if path is None:
        path = tdef.source
        if not os.path.isabs(path):
            path = os.path.join(schema.base_dir, path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path!r} is empty, expected a header row")
        declared = [c.name for c in tdef.columns]
        missing = set(declared) - set(header)
        if missing:
            raise IngestError(
                f"table {tdef.name!r}: missing column(s) {sorted(missing)} in {path!r}")
        extra = set(header) - set(declared)
        if extra:
            raise IngestError(
                f"table {tdef.name!r}: undeclared column(s) {sorted(extra)} in {path!r}")
        col_pos = {name: header.index(name) for name in declared}
        raw: dict[str, list] = {name: [] for name in declared}
        nulls: dict[str, list] = {name: [] for name in declared}
        n = 0
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise IngestError(
                    f"table {tdef.name!r}: row {rownum} has {len(row)} cells, "
                    f"expected {len(header)}")
            n += 1
            for cdef in tdef.columns:
                cell = row[col_pos[cdef.name]]
                if cell == "":
                    nulls[cdef.name].append(True)
                    raw[cdef.name].append(_null_placeholder(cdef.kind))
                    continue
                nulls[cdef.name].append(False)
                raw[cdef.name].append(_parse_cell(cell, cdef, tdef.name, rownum))

    columns = {}
    null_mask = {}
    for cdef in tdef.columns:
        if cdef.kind == KIND_INTEGER:
            columns[cdef.name] = np.asarray(raw[cdef.name], dtype=np.int64)
        elif cdef.kind == KIND_REAL:
            columns[cdef.name] = np.asarray(raw[cdef.name], dtype=np.float64)
        else:
            columns[cdef.name] = np.asarray(raw[cdef.name], dtype=object)
        null_mask[cdef.name] = np.asarray(nulls[cdef.name], dtype=bool)
    return TableData(name=tdef.name, columns=columns, null_mask=null_mask, row_count=n)


def _null_placeholder(kind: str):
    if kind == KIND_INTEGER:
        return 0
    if kind == KIND_REAL:
        return float("nan")
    return ""


def _parse_cell(cell: str, cdef: ColumnDef, table: str, rownum: int):
    if cdef.kind == KIND_INTEGER:
        try:
            return int(cell)
        except ValueError:
            raise IngestError(
                f"table {table!r}: row {rownum}, column {cdef.name!r}: "
                f"cannot parse {cell!r} as integer") from None
    if cdef.kind == KIND_REAL:
        try:
            return float(cell)
        except ValueError:
            raise IngestError(
                f"table {table!r}: row {rownum}, column {cdef.name!r}: "
                f"cannot parse {cell!r} as real") from None
    return cell


def write_table_csv(data: TableData, tdef: TableDef, path: str) -> None:
    """Serialize a TableData back to RFC-4180 CSV (nulls become empty cells)."""
    names = [c.name for c in tdef.columns]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.row_count):
            row = []
            for cdef in tdef.columns:
                if data.null_mask[cdef.name][i]:
                    row.append("")
                else:
                    v = data.columns[cdef.name][i]
                    if cdef.kind == KIND_INTEGER:
                        row.append(str(int(v)))
                    elif cdef.kind == KIND_REAL:
                        row.append(repr(float(v)))
                    else:
                        row.append(str(v))
            writer.writerow(row)


@dataclass
class KeyDomain:
    """One connected component of the PK/FK column graph, with shared bins."""

    id: str
    columns: frozenset[str]
    lo: float = 0.0
    hi: float = 0.0
    bin_count: int = 0
    boundaries: np.ndarray | None = None

    def set_boundaries(self, lo: float, hi: float, bin_count: int) -> None:
        if bin_count < 1:
            raise SchemaError("bin_count must be >= 1")
        if hi <= lo:
            # degenerate single-value domain still needs positive bin width
            hi = lo + 1.0
        self.lo = float(lo)
        self.hi = float(hi)
        self.bin_count = int(bin_count)
        self.boundaries = np.linspace(self.lo, self.hi, bin_count + 1)

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bin_count

    def bin_of(self, value) -> int:
        v = float(value)
        if v < self.lo or v > self.hi:
            raise DomainBoundsError(
                f"value {value!r} outside domain {self.id!r} bounds "
                f"[{self.lo}, {self.hi}]")
        idx = int((v - self.lo) / self.width)
        return min(max(idx, 0), self.bin_count - 1)

    def bins_of(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        if len(v) and (v.min() < self.lo or v.max() > self.hi):
            bad = v[(v < self.lo) | (v > self.hi)][0]
            raise DomainBoundsError(
                f"value {bad!r} outside domain {self.id!r} bounds "
                f"[{self.lo}, {self.hi}]")
        idx = np.floor((v - self.lo) / self.width).astype(np.int64)
        return np.clip(idx, 0, self.bin_count - 1)

    def bin_interval(self, i: int) -> tuple[float, float]:
        if not 0 <= i < self.bin_count:
            raise IndexError(f"bin index {i} out of range")
        return (self.lo + i * self.width, self.lo + (i + 1) * self.width)


def infer_key_domains(schema: Schema) -> list[KeyDomain]:
    """Union-find over FK edges; one domain per component with >= 2 columns.

    Template join edges must stay within a single inferred domain, otherwise
    the schema is inconsistent.
    """
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            # deterministic representative regardless of edge order
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb

    for frm, to in schema.foreign_keys:
        union(frm, to)

    components: dict[str, set[str]] = {}
    for col in parent:
        components.setdefault(find(col), set()).add(col)

    domains = []
    for root in sorted(components):
        members = components[root]
        if len(members) < 2:
            continue
        domains.append(KeyDomain(id=min(members), columns=frozenset(members)))

    by_column = {c: d for d in domains for c in d.columns}
    for template in schema.templates:
        for a, b in template:
            da, db = by_column.get(a), by_column.get(b)
            if da is None or db is None or da.id != db.id:
                raise SchemaError(
                    f"template edge {a}={b} does not join columns of one key domain")
    return domains


def set_domain_boundaries(domains: list[KeyDomain],
                          tables: dict[str, TableData],
                          bin_count: int) -> None:
    """Compute global min/max over all member columns and fix equi-width bins."""
    for dom in domains:
        lo, hi = np.inf, -np.inf
        for qual in dom.columns:
            tname, cname = split_qualified(qual)
            vals = tables[tname].non_null(cname)
            if len(vals):
                lo = min(lo, float(vals.min()))
                hi = max(hi, float(vals.max()))
        if lo > hi:  # all member columns empty
            lo, hi = 0.0, 1.0
        dom.set_boundaries(lo, hi, bin_count)


def classify_columns(data: TableData, tdef: TableDef,
                     threshold: int) -> dict[str, str]:
    """Classify non-key columns as 'categorical' or 'numeric'.

    A column is categorical iff it is declared so (kind or manual flag) or its
    distinct-value count falls below the threshold.  Manual declarations win.
    """
    out = {}
    for cdef in tdef.columns:
        if cdef.role == ROLE_KEY:
            continue
        if cdef.kind == KIND_CATEGORICAL or cdef.categorical:
            out[cdef.name] = "categorical"
        elif data.distinct_count(cdef.name) < threshold:
            out[cdef.name] = "categorical"
        else:
            out[cdef.name] = "numeric"
    return out
