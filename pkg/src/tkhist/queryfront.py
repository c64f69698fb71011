"""Parsing of the supported SQL subset and decomposition into star/chain plans.

Supported shape: SELECT COUNT(*) FROM t1 [AS a][, ...] WHERE <conjuncts>,
where each conjunct is either a column=column equi-join or a column-vs-literal
predicate (=, <, <=, >, >=, BETWEEN, IN).  Implicit-join syntax only;
disjunctions and everything beyond COUNT(*) are rejected.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .catalog import (KIND_CATEGORICAL, KIND_INTEGER, KIND_REAL, Schema)
from .errors import (CyclicJoinError, ParseError, PlanError,
                     UnsupportedQueryError)
from .predicate import Predicate

_KEYWORDS = {"select", "count", "from", "where", "and", "as", "between",
             "in", "or"}

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<number>\d+\.\d+|\d+)
      | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<string>'(?:[^']|'')*')
      | (?P<op><=|>=|=|<|>|\(|\)|,|\.|\*)
    """,
    re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # 'number' | 'ident' | 'keyword' | 'string' | 'op' | 'eof'
    value: object
    offset: int


def _tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "ws":
            pos = m.end()
            continue
        value: object = m.group()
        kind = m.lastgroup
        if kind == "ident" and value.lower() in _KEYWORDS:
            kind, value = "keyword", value.lower()
        elif kind == "number":
            value = float(value) if "." in value else int(value)
        elif kind == "string":
            value = value[1:-1].replace("''", "'")
        tokens.append(Token(kind, value, pos))
        pos = m.end()
    tokens.append(Token("eof", None, len(text)))
    return tokens


@dataclass
class Query:
    text: str
    aliases: dict[str, str]  # alias -> table name, in FROM order
    join_edges: list[tuple[str, str]]  # ("a.col", "b.col"), alias-qualified
    predicates: list[Predicate]

    def edge_set(self) -> set[frozenset]:
        return {frozenset(e) for e in self.join_edges}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, value=None) -> Token:
        tok = self.next()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {tok.value!r}", tok.offset)
        return tok

    def parse(self) -> Query:
        self.expect("keyword", "select")
        self.expect("keyword", "count")
        self.expect("op", "(")
        self.expect("op", "*")
        self.expect("op", ")")
        self.expect("keyword", "from")
        aliases = self._from_list()
        edges: list[tuple[str, str]] = []
        preds: list[Predicate] = []
        if self.peek().kind == "keyword" and self.peek().value == "where":
            self.next()
            while True:
                self._conjunct(aliases, edges, preds)
                tok = self.peek()
                if tok.kind == "keyword" and tok.value == "and":
                    self.next()
                    continue
                if tok.kind == "keyword" and tok.value == "or":
                    raise UnsupportedQueryError(
                        f"OR is not supported (at byte {tok.offset})")
                break
        tok = self.peek()
        if tok.kind != "eof":
            if tok.kind == "keyword" and tok.value == "or":
                raise UnsupportedQueryError(
                    f"OR is not supported (at byte {tok.offset})")
            raise ParseError(f"trailing input {tok.value!r}", tok.offset)
        # dedupe join edges, keep first-seen order
        seen: set[frozenset] = set()
        unique_edges = []
        for e in edges:
            key = frozenset(e)
            if key not in seen:
                seen.add(key)
                unique_edges.append(e)
        return Query(text=self.text, aliases=aliases,
                     join_edges=unique_edges, predicates=preds)

    def _from_list(self) -> dict[str, str]:
        aliases: dict[str, str] = {}
        while True:
            table = self.expect("ident").value
            alias = table
            tok = self.peek()
            if tok.kind == "keyword" and tok.value == "as":
                self.next()
                alias = self.expect("ident").value
            elif tok.kind == "ident":
                alias = self.next().value
            if alias in aliases:
                raise ParseError(f"duplicate alias {alias!r}", tok.offset)
            aliases[alias] = table
            if self.peek().kind == "op" and self.peek().value == ",":
                self.next()
                continue
            return aliases

    def _column_ref(self) -> str:
        first = self.expect("ident")
        if self.peek().kind == "op" and self.peek().value == ".":
            self.next()
            second = self.expect("ident")
            return f"{first.value}.{second.value}"
        return str(first.value)

    def _literal(self):
        tok = self.next()
        if tok.kind in ("number", "string"):
            return tok.value
        raise ParseError(f"expected literal, found {tok.value!r}", tok.offset)

    def _conjunct(self, aliases, edges, preds) -> None:
        col = self._column_ref()
        tok = self.next()
        if tok.kind == "keyword" and tok.value == "between":
            lo = self._literal()
            self.expect("keyword", "and")
            hi = self._literal()
            preds.append(Predicate(column=col, op="between", value=(lo, hi)))
            return
        if tok.kind == "keyword" and tok.value == "in":
            self.expect("op", "(")
            values = [self._literal()]
            while self.peek().kind == "op" and self.peek().value == ",":
                self.next()
                values.append(self._literal())
            self.expect("op", ")")
            preds.append(Predicate(column=col, op="in", value=frozenset(values)))
            return
        if tok.kind != "op" or tok.value not in ("=", "<", "<=", ">", ">="):
            raise ParseError(f"expected comparison operator, found {tok.value!r}",
                             tok.offset)
        op = tok.value
        nxt = self.peek()
        if op == "=" and nxt.kind == "ident":
            other = self._column_ref()
            edges.append((col, other))
            return
        preds.append(Predicate(column=col, op=op, value=self._literal()))


def parse_sql(text: str) -> Query:
    """Parse a COUNT(*) query; keywords are case-insensitive."""
    return _Parser(text).parse()


def unparse(query: Query) -> str:
    """Render a Query back to canonical SQL text."""
    from_items = []
    for alias, table in query.aliases.items():
        from_items.append(table if alias == table else f"{table} AS {alias}")
    parts = [f"SELECT COUNT(*) FROM {', '.join(from_items)}"]
    conjuncts = [f"{a} = {b}" for a, b in query.join_edges]
    for p in query.predicates:
        conjuncts.append(_render_predicate(p))
    if conjuncts:
        parts.append("WHERE " + " AND ".join(conjuncts))
    return " ".join(parts)


def _render_literal(v) -> str:
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v) if isinstance(v, float) else str(v)


def _render_predicate(p: Predicate) -> str:
    if p.op == "between":
        lo, hi = p.value
        return f"{p.column} BETWEEN {_render_literal(lo)} AND {_render_literal(hi)}"
    if p.op == "in":
        vals = ", ".join(_render_literal(v) for v in sorted(p.value, key=repr))
        return f"{p.column} IN ({vals})"
    return f"{p.column} {p.op} {_render_literal(p.value)}"


def bind(query: Query, schema: Schema) -> Query:
    """Resolve bare columns to aliases and validate references and literals."""

    def resolve(ref: str) -> str:
        if "." in ref:
            alias, col = ref.split(".", 1)
            if alias not in query.aliases:
                raise UnsupportedQueryError(f"unknown alias {alias!r}")
            table = schema.table(query.aliases[alias])
            if not table.has_column(col):
                raise UnsupportedQueryError(
                    f"table {table.name!r} has no column {col!r}")
            return f"{alias}.{col}"
        owners = [a for a, t in query.aliases.items()
                  if schema.table(t).has_column(ref)]
        if not owners:
            raise UnsupportedQueryError(f"unknown column {ref!r}")
        if len(owners) > 1:
            raise UnsupportedQueryError(
                f"ambiguous column {ref!r} (candidates: {sorted(owners)})")
        return f"{owners[0]}.{ref}"

    for table in query.aliases.values():
        schema.table(table)  # raises on unknown table

    edges = [(resolve(a), resolve(b)) for a, b in query.join_edges]
    preds = []
    for p in query.predicates:
        col = resolve(p.column)
        alias, cname = col.split(".", 1)
        kind = schema.table(query.aliases[alias]).column(cname).kind
        preds.append(Predicate(column=col, op=p.op,
                               value=_coerce_operand(p, kind)))
    return Query(text=query.text, aliases=dict(query.aliases),
                 join_edges=edges, predicates=preds)


def _coerce_operand(p: Predicate, kind: str):
    def one(v):
        if kind == KIND_CATEGORICAL:
            if not isinstance(v, str):
                raise UnsupportedQueryError(
                    f"column {p.column!r} is categorical, got numeric literal {v!r}")
            return v
        if isinstance(v, str):
            raise UnsupportedQueryError(
                f"column {p.column!r} is {kind}, got string literal {v!r}")
        if kind == KIND_INTEGER:
            if isinstance(v, float) and not v.is_integer():
                raise UnsupportedQueryError(
                    f"column {p.column!r} is integer, got fractional literal {v!r}")
            return int(v)
        return float(v)

    if p.op == "between":
        return (one(p.value[0]), one(p.value[1]))
    if p.op == "in":
        return frozenset(one(v) for v in p.value)
    return one(p.value)


def validate_acyclic(query: Query) -> None:
    """Reject queries whose join multigraph contains a cycle."""
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in query.join_edges:
        aa, ab = a.split(".")[0], b.split(".")[0]
        if aa == ab:
            raise CyclicJoinError(f"self-join edge {a} = {b}")
        ra, rb = find(aa), find(ab)
        if ra == rb:
            raise CyclicJoinError(f"cyclic join detected at edge {a} = {b}")
        parent[ra] = rb


@dataclass
class PlanGroup:
    domain_id: str
    members: list[tuple[str, str]]  # (alias, column name), sorted by alias
    suppressed: set = field(default_factory=set)  # members folded in a child


@dataclass
class ChainLink:
    parent: int
    child: int
    bridge_alias: str
    parent_col: str  # bridge column on the parent group's domain
    child_col: str   # bridge column on the child group's domain


@dataclass
class SubQueryPlan:
    groups: list[PlanGroup]
    links: list[ChainLink]
    root: int

    def children(self, gid: int) -> list[ChainLink]:
        return [l for l in self.links if l.parent == gid]


def decompose(query: Query, column_domain: dict[str, str]) -> SubQueryPlan:
    """Group query tables by shared key domain and chain groups via bridges.

    `column_domain` maps "table.column" to a domain id.  Each join edge must
    connect two columns of one domain; groups are connected through tables
    owning key columns in two domains.
    """
    if not query.join_edges:
        raise PlanError("query has no join edges; single-table queries are "
                        "estimated directly")
    members: dict[str, set[tuple[str, str]]] = {}
    for a, b in query.join_edges:
        doms = []
        for ref in (a, b):
            alias, col = ref.split(".", 1)
            qual = f"{query.aliases[alias]}.{col}"
            dom = column_domain.get(qual)
            if dom is None:
                raise PlanError(f"column {qual!r} belongs to no key domain")
            doms.append(dom)
            members.setdefault(dom, set()).add((alias, col))
        if doms[0] != doms[1]:
            raise PlanError(f"join edge {a} = {b} spans two key domains")

    # connectivity over aliases
    touched = {alias for m in members.values() for alias, _ in m}
    missing = set(query.aliases) - touched
    if missing:
        raise PlanError(f"disconnected join graph: {sorted(missing)} "
                        f"participate in no join edge")

    domain_ids = sorted(members)
    gid_of = {d: i for i, d in enumerate(domain_ids)}
    groups = [PlanGroup(domain_id=d, members=sorted(members[d]))
              for d in domain_ids]

    # bridges: aliases present in exactly two groups
    bridge_edges = []
    for alias in sorted({a for m in members.values() for a, _ in m}):
        present = [(d, col) for d in domain_ids
                   for (al, col) in members[d] if al == alias]
        if len(present) > 2:
            raise UnsupportedQueryError(
                f"table alias {alias!r} joins on {len(present)} key domains; "
                f"at most two are supported")
        if len(present) == 2:
            (d1, c1), (d2, c2) = present
            bridge_edges.append((alias, d1, c1, d2, c2))

    if len(bridge_edges) != len(groups) - 1:
        raise PlanError("star groups are not chained into a tree")

    root = 0  # smallest domain id
    adj: dict[int, list] = {i: [] for i in range(len(groups))}
    for alias, d1, c1, d2, c2 in bridge_edges:
        adj[gid_of[d1]].append((gid_of[d2], alias, c1, c2))
        adj[gid_of[d2]].append((gid_of[d1], alias, c2, c1))

    links: list[ChainLink] = []
    visited = {root}
    stack = [root]
    while stack:
        gid = stack.pop()
        for other, alias, col_here, col_there in sorted(adj[gid]):
            if other in visited:
                continue
            visited.add(other)
            links.append(ChainLink(parent=gid, child=other, bridge_alias=alias,
                                   parent_col=col_here, child_col=col_there))
            groups[gid].suppressed.add((alias, col_here))
            stack.append(other)
    if len(visited) != len(groups):
        raise PlanError("star groups are not connected into one tree")
    return SubQueryPlan(groups=groups, links=links, root=root)
