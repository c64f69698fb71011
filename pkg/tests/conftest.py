import numpy as np
import pytest

from tkhist.catalog import TableData, schema_from_document


def make_table(name: str, columns: dict, nulls: dict | None = None) -> TableData:
    """Build columnar TableData from plain lists; nulls maps column -> bool list."""
    cols = {}
    for cname, values in columns.items():
        if any(isinstance(v, str) for v in values):
            cols[cname] = np.asarray(values, dtype=object)
        elif any(isinstance(v, float) for v in values):
            cols[cname] = np.asarray(values, dtype=np.float64)
        else:
            cols[cname] = np.asarray(values, dtype=np.int64)
    n = len(next(iter(cols.values()))) if cols else 0
    null_mask = {c: np.zeros(n, dtype=bool) for c in cols}
    if nulls:
        for c, mask in nulls.items():
            null_mask[c] = np.asarray(mask, dtype=bool)
    return TableData(name=name, columns=cols, null_mask=null_mask, row_count=n)


def two_table_schema(extra_attrs: tuple[str, ...] = ("y",)):
    """r(k, attrs...) joined to s(k, attrs...) on k."""
    def table_doc(name):
        cols = [{"name": "k", "kind": "integer", "role": "key"}]
        cols += [{"name": a, "kind": "integer", "role": "attribute"}
                 for a in extra_attrs]
        return {"name": name, "file": f"{name}.csv", "columns": cols}

    doc = {
        "tables": [table_doc("r"), table_doc("s")],
        "foreign_keys": [{"from": "s.k", "to": "r.k"}],
        "templates": [["r.k=s.k"]],
    }
    return schema_from_document(doc)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
