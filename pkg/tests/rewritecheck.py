"""Structural checks shared by the rewriter unit tests and the acceptance suite."""
from __future__ import annotations

import dataclasses
from collections import Counter

from gridfed.sql import ast as A

IDENTIFIER_FIELDS = {
    A.ColumnRef: ("column", "qualifier"),
    A.NamedTable: ("name",),
    A.QualifiedStar: ("table",),
}


def literals(node) -> Counter:
    """Multiset of string literal values and number literal texts anywhere in ``node``."""
    out = Counter()

    def walk(n):
        if isinstance(n, A.StringLiteral):
            out[("s", n.value)] += 1
        elif isinstance(n, A.NumberLiteral):
            out[("n", n.text)] += 1
        if dataclasses.is_dataclass(n):
            for f in dataclasses.fields(n):
                walk(getattr(n, f.name))
        elif isinstance(n, tuple):
            for x in n:
                walk(x)

    walk(node)
    return out


class ShapeMismatch(AssertionError):
    pass


def check_isomorphic(orig, new, stars, path=()):
    """Assert ``new`` has the node structure of ``orig`` up to identifier leaves.

    Allowed differences: identifier names (tables, columns, qualifiers),
    aliases attached to unaliased select items, and ``*`` items replaced by
    the number of columns recorded in ``stars``. User-written aliases must
    appear verbatim.
    """
    def fail(msg):
        raise ShapeMismatch(f"at {path}: {msg}")

    if isinstance(orig, A.Query):
        if not isinstance(new, A.Query):
            fail(f"Query became {type(new).__name__}")
        cursor = 0
        for i, item in enumerate(orig.select_items):
            ipath = path + (("select_items", i),)
            if isinstance(item, (A.Star, A.QualifiedStar)):
                n = len(stars[ipath].entries)
                for got in new.select_items[cursor:cursor + n]:
                    if not (isinstance(got, A.SelectExpr) and isinstance(got.expr, A.ColumnRef) and got.alias):
                        fail(f"star expanded into {got!r}")
                cursor += n
                continue
            got = new.select_items[cursor] if cursor < len(new.select_items) else None
            if not isinstance(got, A.SelectExpr):
                fail(f"select item {i} became {got!r}")
            if item.alias is not None and got.alias != item.alias:
                fail(f"user alias {item.alias!r} became {got.alias!r}")
            if got.alias is None:
                fail("select item left without a center-vocabulary label")
            check_isomorphic(item.expr, got.expr, stars, ipath + (("expr", None),))
            cursor += 1
        if cursor != len(new.select_items):
            fail("extra select items")
        for f in dataclasses.fields(A.Query):
            if f.name == "select_items":
                continue
            check_isomorphic(getattr(orig, f.name), getattr(new, f.name), stars, path + ((f.name, None),))
        return

    if isinstance(orig, tuple):
        if not isinstance(new, tuple) or len(orig) != len(new):
            fail(f"sequence length {len(orig)} vs {len(new) if isinstance(new, tuple) else new!r}")
        field_name = path[-1][0] if path else None
        base = path[:-1]
        for i, (a, b) in enumerate(zip(orig, new)):
            check_isomorphic(a, b, stars, base + ((field_name, i),))
        return

    if dataclasses.is_dataclass(orig):
        if type(orig) is not type(new):
            fail(f"{type(orig).__name__} became {type(new).__name__}")
        skip = IDENTIFIER_FIELDS.get(type(orig), ())
        for f in dataclasses.fields(orig):
            if f.name in skip:
                continue
            check_isomorphic(getattr(orig, f.name), getattr(new, f.name), stars, path + ((f.name, None),))
        return

    if orig != new:
        fail(f"{orig!r} != {new!r}")
