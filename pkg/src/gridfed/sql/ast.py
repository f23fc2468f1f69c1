"""AST node types for the supported SELECT dialect.

All nodes are frozen dataclasses holding tuples, so ASTs compare by value
and can be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Union

# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class ColumnRef:
    column: str
    qualifier: Optional[str] = None


@dataclass(frozen=True)
class StringLiteral:
    value: str


@dataclass(frozen=True)
class NumberLiteral:
    text: str


@dataclass(frozen=True)
class BoolLiteral:
    value: bool


@dataclass(frozen=True)
class NullLiteral:
    pass


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: tuple = ()
    star_arg: bool = False


@dataclass(frozen=True)
class Subquery:
    query: "Query"


@dataclass(frozen=True)
class ExprList:
    items: tuple


@dataclass(frozen=True)
class Paren:
    expr: "Expr"


Expr = Union[
    ColumnRef, StringLiteral, NumberLiteral, BoolLiteral, NullLiteral, Binary, Unary,
    FunctionCall, Subquery, ExprList, Paren,
]

BINARY_OPS = ("=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/", "AND", "OR", "LIKE", "IN", "IS", "IS NOT")
COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")
AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")

# -- select list / sources ---------------------------------------------------


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class QualifiedStar:
    table: str


@dataclass(frozen=True)
class SelectExpr:
    expr: Expr
    alias: Optional[str] = None


SelectItem = Union[Star, QualifiedStar, SelectExpr]


@dataclass(frozen=True)
class NamedTable:
    name: str
    alias: Optional[str] = None

    @property
    def exposed_name(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class DerivedTable:
    query: "Query"
    alias: str

    @property
    def exposed_name(self) -> str:
        return self.alias


TableSource = Union[NamedTable, DerivedTable]

JOIN_KINDS = ("inner", "left", "right", "cross")


@dataclass(frozen=True)
class Join:
    kind: str
    source: TableSource
    on: Optional[Expr] = None


@dataclass(frozen=True)
class OrderItem:
    key: Union[Expr, int]
    descending: bool = False

    @property
    def positional(self) -> bool:
        return isinstance(self.key, int)


@dataclass(frozen=True)
class Query:
    select_items: tuple
    from_: TableSource
    joins: tuple = ()
    where: Optional[Expr] = None
    group_by: tuple = ()
    having: Optional[Expr] = None
    order_by: tuple = ()
    limit: Optional[int] = None
    distinct: bool = False

    @property
    def sources(self) -> tuple:
        return (self.from_,) + tuple(j.source for j in self.joins)


NODE_TYPES = (
    ColumnRef, StringLiteral, NumberLiteral, BoolLiteral, NullLiteral, Binary, Unary,
    FunctionCall, Subquery, ExprList, Paren, Star, QualifiedStar, SelectExpr, NamedTable,
    DerivedTable, Join, OrderItem, Query,
)


def children(node):
    """Yield ``(field_name, index_or_None, child)`` for every child node."""
    for f in fields(node):
        value = getattr(node, f.name)
        if isinstance(value, tuple):
            for i, item in enumerate(value):
                if isinstance(item, NODE_TYPES):
                    yield f.name, i, item
        elif isinstance(value, NODE_TYPES):
            yield f.name, None, value


def iter_nodes(node):
    """Pre-order walk over every node reachable from ``node``."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        kids = [c for _, _, c in children(current)]
        stack.extend(reversed(kids))


def contains_aggregate(expr) -> bool:
    """True if ``expr`` has an aggregate call outside of any nested subquery."""
    if isinstance(expr, FunctionCall) and expr.name.upper() in AGGREGATES:
        return True
    if isinstance(expr, Subquery):
        return False
    return any(contains_aggregate(c) for _, _, c in children(expr))
