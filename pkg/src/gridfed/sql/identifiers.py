from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ast as A

CLAUSES = ("select", "from", "join", "where", "group_by", "having", "order_by")


@dataclass(frozen=True)
class TableOccurrence:
    name: str
    alias: Optional[str]
    clause: str
    depth: int = 0


@dataclass(frozen=True)
class ColumnOccurrence:
    qualifier: Optional[str]
    name: str
    clause: str
    depth: int = 0


@dataclass
class IdentifierReport:
    table_refs: list = field(default_factory=list)
    column_refs: list = field(default_factory=list)


def collect_identifiers(query: A.Query) -> IdentifierReport:
    """Every table and column reference in ``query``, in clause order.

    References inside subqueries carry the clause they occur in within the
    subquery and their nesting depth (0 for the outermost query).
    """
    report = IdentifierReport()
    _visit_query(query, 0, report)
    return report


def _visit_query(q: A.Query, depth: int, report: IdentifierReport) -> None:
    for item in q.select_items:
        if isinstance(item, A.SelectExpr):
            _visit_expr(item.expr, "select", depth, report)
    _visit_source(q.from_, "from", depth, report)
    for j in q.joins:
        _visit_source(j.source, "join", depth, report)
        if j.on is not None:
            _visit_expr(j.on, "join", depth, report)
    if q.where is not None:
        _visit_expr(q.where, "where", depth, report)
    for e in q.group_by:
        _visit_expr(e, "group_by", depth, report)
    if q.having is not None:
        _visit_expr(q.having, "having", depth, report)
    for o in q.order_by:
        if not o.positional:
            _visit_expr(o.key, "order_by", depth, report)


def _visit_source(src, clause, depth, report) -> None:
    if isinstance(src, A.NamedTable):
        report.table_refs.append(TableOccurrence(src.name, src.alias, clause, depth))
    else:
        _visit_query(src.query, depth + 1, report)


def _visit_expr(expr, clause, depth, report) -> None:
    if isinstance(expr, A.ColumnRef):
        report.column_refs.append(ColumnOccurrence(expr.qualifier, expr.column, clause, depth))
    elif isinstance(expr, A.Subquery):
        _visit_query(expr.query, depth + 1, report)
    else:
        for _, _, child in A.children(expr):
            _visit_expr(child, clause, depth, report)
