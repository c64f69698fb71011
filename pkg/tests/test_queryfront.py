import pytest

from tkhist.catalog import schema_from_document
from tkhist.errors import (CyclicJoinError, ParseError, PlanError,
                           UnsupportedQueryError)
from tkhist.predicate import Predicate
from tkhist.queryfront import (Query, bind, decompose, parse_sql, unparse,
                               validate_acyclic)


def chain_schema():
    doc = {
        "tables": [
            {"name": "a", "columns": [{"name": "k1", "role": "key"},
                                      {"name": "y", "kind": "integer"}]},
            {"name": "b", "columns": [{"name": "k1", "role": "key"},
                                      {"name": "k2", "role": "key"}]},
            {"name": "c", "columns": [{"name": "k2", "role": "key"},
                                      {"name": "tag", "kind": "categorical"}]},
        ],
        "foreign_keys": [{"from": "b.k1", "to": "a.k1"},
                         {"from": "c.k2", "to": "b.k2"}],
    }
    return schema_from_document(doc)


COLUMN_DOMAIN = {"a.k1": "a.k1", "b.k1": "a.k1", "b.k2": "b.k2", "c.k2": "b.k2"}


class TestParse:
    def test_joins_aliases_predicates(self):
        q = parse_sql("SELECT COUNT(*) FROM a, b AS bb, c "
                      "WHERE a.k1 = bb.k1 AND bb.k2 = c.k2 AND a.y <= 10 "
                      "AND c.tag = 'x'")
        assert q.aliases == {"a": "a", "bb": "b", "c": "c"}
        assert q.join_edges == [("a.k1", "bb.k1"), ("bb.k2", "c.k2")]
        assert [p.op for p in q.predicates] == ["<=", "="]

    def test_between_and_in(self):
        q = parse_sql("select count(*) from a where a.y between 1 and 5 "
                      "and a.y in (1, 2, 3)")
        assert q.predicates[0].value == (1, 5)
        assert q.predicates[1].value == frozenset({1, 2, 3})

    def test_string_literal_escaping(self):
        q = parse_sql("SELECT COUNT(*) FROM c WHERE c.tag = 'it''s'")
        assert q.predicates[0].value == "it's"

    def test_or_rejected(self):
        with pytest.raises(UnsupportedQueryError, match="OR"):
            parse_sql("SELECT COUNT(*) FROM a WHERE a.y = 1 OR a.y = 2")

    def test_parse_error_carries_offset(self):
        with pytest.raises(ParseError) as err:
            parse_sql("SELECT COUNT(*) FROM a WHERE ???")
        assert err.value.offset == 29

    def test_duplicate_join_edges_deduped(self):
        q = parse_sql("SELECT COUNT(*) FROM a, b "
                      "WHERE a.k1 = b.k1 AND b.k1 = a.k1")
        assert len(q.join_edges) == 1

    def test_unparse_round_trips(self):
        text = ("SELECT COUNT(*) FROM a, b AS bb WHERE a.k1 = bb.k1 "
                "AND a.y BETWEEN 1 AND 5 AND bb.k2 > 3")
        q = parse_sql(text)
        q2 = parse_sql(unparse(q))
        assert q2.join_edges == q.join_edges
        assert q2.predicates == q.predicates
        assert q2.aliases == q.aliases


class TestBind:
    def test_bare_column_resolved(self):
        q = bind(parse_sql("SELECT COUNT(*) FROM a, c WHERE y <= 3"),
                 chain_schema())
        assert q.predicates[0].column == "a.y"

    def test_ambiguous_bare_column_rejected(self):
        with pytest.raises(UnsupportedQueryError, match="ambiguous"):
            bind(parse_sql("SELECT COUNT(*) FROM a, b WHERE k1 = 1"),
                 chain_schema())

    def test_unknown_column_rejected(self):
        with pytest.raises(UnsupportedQueryError, match="no column"):
            bind(parse_sql("SELECT COUNT(*) FROM a WHERE a.zzz = 1"),
                 chain_schema())

    def test_type_coercion_errors(self):
        schema = chain_schema()
        with pytest.raises(UnsupportedQueryError, match="categorical"):
            bind(parse_sql("SELECT COUNT(*) FROM c WHERE c.tag = 3"), schema)
        with pytest.raises(UnsupportedQueryError, match="string literal"):
            bind(parse_sql("SELECT COUNT(*) FROM a WHERE a.y = 'x'"), schema)
        with pytest.raises(UnsupportedQueryError, match="fractional"):
            bind(parse_sql("SELECT COUNT(*) FROM a WHERE a.y = 1.5"), schema)

    def test_integral_float_accepted(self):
        q = bind(parse_sql("SELECT COUNT(*) FROM a WHERE a.y = 2.0"),
                 chain_schema())
        assert q.predicates[0].value == 2


class TestValidateAcyclic:
    def test_cycle_rejected(self):
        q = parse_sql("SELECT COUNT(*) FROM a, b, c WHERE a.k1 = b.k1 "
                      "AND b.k2 = c.k2 AND c.k2 = a.k1")
        with pytest.raises(CyclicJoinError):
            validate_acyclic(q)

    def test_self_join_rejected(self):
        q = parse_sql("SELECT COUNT(*) FROM a WHERE a.k1 = a.y")
        with pytest.raises(CyclicJoinError, match="self-join"):
            validate_acyclic(q)

    def test_tree_accepted(self):
        q = parse_sql("SELECT COUNT(*) FROM a, b, c WHERE a.k1 = b.k1 "
                      "AND b.k2 = c.k2")
        validate_acyclic(q)


class TestDecompose:
    def test_two_groups_one_link(self):
        q = bind(parse_sql("SELECT COUNT(*) FROM a, b, c WHERE a.k1 = b.k1 "
                           "AND b.k2 = c.k2"), chain_schema())
        plan = decompose(q, COLUMN_DOMAIN)
        assert len(plan.groups) == 2
        assert len(plan.links) == 1
        link = plan.links[0]
        assert link.bridge_alias == "b"
        root = plan.groups[plan.root]
        assert root.domain_id == "a.k1"
        # the bridge's parent-side member is suppressed in the parent group
        assert ("b", "k1") in root.suppressed

    def test_single_group_no_links(self):
        q = bind(parse_sql("SELECT COUNT(*) FROM a, b WHERE a.k1 = b.k1"),
                 chain_schema())
        plan = decompose(q, COLUMN_DOMAIN)
        assert len(plan.groups) == 1 and not plan.links

    def test_disconnected_graph_rejected(self):
        q = bind(parse_sql("SELECT COUNT(*) FROM a, b, c WHERE a.k1 = b.k1"),
                 chain_schema())
        with pytest.raises(PlanError, match="disconnected"):
            decompose(q, COLUMN_DOMAIN)

    def test_no_join_edges_rejected(self):
        q = bind(parse_sql("SELECT COUNT(*) FROM a WHERE a.y = 1"),
                 chain_schema())
        with pytest.raises(PlanError):
            decompose(q, COLUMN_DOMAIN)

    def test_bridge_on_three_domains_unsupported(self):
        aliases = {"a": "a", "b": "b", "c": "c", "d": "d"}
        edges = [("a.k1", "b.k1"), ("b.k2", "c.k2"), ("b.k3", "d.k3")]
        q = Query(text="", aliases=aliases, join_edges=edges, predicates=[])
        cd = dict(COLUMN_DOMAIN)
        cd.update({"b.k3": "b.k3", "d.k3": "b.k3"})
        with pytest.raises(UnsupportedQueryError, match="key domains"):
            decompose(q, cd)
