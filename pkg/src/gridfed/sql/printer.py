"""Canonical SQL text for an AST.

Keywords are upper case, tokens are separated by single spaces, and
parentheses appear where the AST has a Paren/Subquery/ExprList node or
where operator precedence would otherwise change the tree.
"""
from __future__ import annotations

import re

from . import ast as A
from .lexer import KEYWORDS

_BARE_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")

_BINARY_PREC = {
    "OR": 1, "AND": 2,
    "=": 4, "<>": 4, "<": 4, "<=": 4, ">": 4, ">=": 4, "LIKE": 4, "IN": 4, "IS": 4, "IS NOT": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}
_NOT_PREC = 3
_NEG_PREC = 7
_ATOM_PREC = 8


def quote_ident(name: str) -> str:
    if _BARE_IDENT.match(name) and name.upper() not in KEYWORDS:
        return name
    return '"' + name.replace('"', '""') + '"'


def quote_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def precedence(expr) -> int:
    if isinstance(expr, A.Binary):
        return _BINARY_PREC[expr.op]
    if isinstance(expr, A.Unary):
        return _NOT_PREC if expr.op == "NOT" else _NEG_PREC
    return _ATOM_PREC


def _wrap(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def print_expr(expr) -> str:
    if isinstance(expr, A.ColumnRef):
        if expr.qualifier is not None:
            return f"{quote_ident(expr.qualifier)}.{quote_ident(expr.column)}"
        return quote_ident(expr.column)
    if isinstance(expr, A.StringLiteral):
        return quote_string(expr.value)
    if isinstance(expr, A.NumberLiteral):
        return expr.text
    if isinstance(expr, A.BoolLiteral):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, A.NullLiteral):
        return "NULL"
    if isinstance(expr, A.Binary):
        p = _BINARY_PREC[expr.op]
        lp = precedence(expr.left)
        left = _wrap(print_expr(expr.left), lp < p or (p == 4 and lp == 4))
        if expr.op in ("IN", "IS", "IS NOT"):
            right = print_expr(expr.right)
        else:
            right = _wrap(print_expr(expr.right), precedence(expr.right) <= p)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, A.Unary):
        if expr.op == "NOT":
            return "NOT " + _wrap(print_expr(expr.operand), precedence(expr.operand) < _NOT_PREC)
        inner = _wrap(print_expr(expr.operand), precedence(expr.operand) < _NEG_PREC)
        # "--" would open a comment
        return ("- " if inner.startswith("-") else "-") + inner
    if isinstance(expr, A.FunctionCall):
        if expr.star_arg:
            return f"{expr.name}(*)"
        return f"{expr.name}({', '.join(print_expr(a) for a in expr.args)})"
    if isinstance(expr, A.Subquery):
        return f"({print_query(expr.query)})"
    if isinstance(expr, A.ExprList):
        return "(" + ", ".join(print_expr(e) for e in expr.items) + ")"
    if isinstance(expr, A.Paren):
        return f"({print_expr(expr.expr)})"
    raise TypeError(f"not an expression node: {expr!r}")


def _print_item(item) -> str:
    if isinstance(item, A.Star):
        return "*"
    if isinstance(item, A.QualifiedStar):
        return f"{quote_ident(item.table)}.*"
    text = print_expr(item.expr)
    if item.alias is not None:
        text += f" AS {quote_ident(item.alias)}"
    return text


def _print_source(src) -> str:
    if isinstance(src, A.DerivedTable):
        return f"({print_query(src.query)}) {quote_ident(src.alias)}"
    text = quote_ident(src.name)
    if src.alias is not None:
        text += " " + quote_ident(src.alias)
    return text


_JOIN_WORDS = {"inner": "JOIN", "left": "LEFT JOIN", "right": "RIGHT JOIN", "cross": "CROSS JOIN"}


def print_query(q: A.Query) -> str:
    parts = ["SELECT"]
    if q.distinct:
        parts.append("DISTINCT")
    parts.append(", ".join(_print_item(i) for i in q.select_items))
    parts.append("FROM " + _print_source(q.from_))
    for j in q.joins:
        parts.append(f"{_JOIN_WORDS[j.kind]} {_print_source(j.source)}")
        if j.on is not None:
            parts.append("ON " + print_expr(j.on))
    if q.where is not None:
        parts.append("WHERE " + print_expr(q.where))
    if q.group_by:
        parts.append("GROUP BY " + ", ".join(print_expr(e) for e in q.group_by))
    if q.having is not None:
        parts.append("HAVING " + print_expr(q.having))
    if q.order_by:
        keys = []
        for o in q.order_by:
            k = str(o.key) if o.positional else print_expr(o.key)
            keys.append(k + (" DESC" if o.descending else ""))
        parts.append("ORDER BY " + ", ".join(keys))
    if q.limit is not None:
        parts.append(f"LIMIT {q.limit}")
    return " ".join(parts)


def to_sql(node) -> str:
    """Print a Query or an expression."""
    if isinstance(node, A.Query):
        return print_query(node)
    return print_expr(node)
