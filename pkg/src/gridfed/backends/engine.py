"""A small in-memory relational engine that evaluates parsed SELECT queries.

Semantics follow standard SQL where the dialect overlaps with it:

* three-valued logic in WHERE / ON / HAVING, only TRUE rows survive;
* aggregates skip NULLs (COUNT(*) excepted); SUM/MIN/MAX/AVG of nothing is NULL;
* ``/`` always produces a float; division by zero yields NULL and a warning;
* ORDER BY is stable, NULLs sort last in both directions;
* output aliases are visible to ORDER BY only.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Optional

from ..errors import ExecutionError, NoSuchColumn, NoSuchTable, SqlTypeError
from ..schema_model import ColumnDef
from ..sql import ast as A
from ..sql.printer import print_expr


@dataclass(frozen=True)
class ResultColumn:
    name: str
    datatype: str


@dataclass(frozen=True)
class ResultSet:
    columns: tuple
    rows: tuple
    warnings: tuple = ()

    @property
    def column_names(self) -> list:
        return [c.name for c in self.columns]


@dataclass(frozen=True)
class StoredTable:
    name: str
    columns: tuple  # of ColumnDef
    rows: tuple = ()

    def index_of(self, column: str) -> Optional[int]:
        key = column.casefold()
        for i, c in enumerate(self.columns):
            if c.name.casefold() == key:
                return i
        return None


@dataclass(frozen=True)
class EmbeddedDatabase:
    tables: tuple = ()  # of StoredTable

    def table(self, name: str) -> Optional[StoredTable]:
        key = name.casefold()
        for t in self.tables:
            if t.name.casefold() == key:
                return t
        return None

    def with_table(self, table: StoredTable) -> "EmbeddedDatabase":
        others = tuple(t for t in self.tables if t.name.casefold() != table.name.casefold())
        return EmbeddedDatabase(others + (table,))


# ---------------------------------------------------------------------------
# value helpers
# ---------------------------------------------------------------------------

def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _kind(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if _is_num(v):
        return "number"
    if isinstance(v, str):
        return "string"
    return type(v).__name__


def compare(a, b) -> int:
    """Three-way compare of two non-NULL values of compatible kinds."""
    ka, kb = _kind(a), _kind(b)
    if ka != kb:
        raise SqlTypeError(f"cannot compare {ka} {a!r} with {kb} {b!r}")
    return (a > b) - (a < b)


def _truth(v, what="condition"):
    if v is None or isinstance(v, bool):
        return v
    raise SqlTypeError(f"{what} must be boolean, got {v!r}")


def _like_regex(pattern: str):
    out = []
    for ch in pattern:
        if ch == "%":
            out.append(".*")
        elif ch == "_":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("".join(out), re.DOTALL)


# ---------------------------------------------------------------------------
# evaluation context
# ---------------------------------------------------------------------------

@dataclass
class _Source:
    exposed: str
    names: list
    types: list


@dataclass
class _Ctx:
    sources: list  # of _Source for the current query level
    row: tuple = ()  # one tuple (or None when null-extended) per source
    group: Optional[list] = None  # rows of the current group when aggregating
    parent: Optional["_Ctx"] = None
    aliases: Optional[dict] = None  # output alias -> value, ORDER BY only
    warnings: list = field(default_factory=list)


class Engine:
    """Executes queries against one :class:`EmbeddedDatabase`.

    Instances hold no per-query state, so one engine may serve many threads.
    """

    def __init__(self, db: EmbeddedDatabase):
        self.db = db

    # -- entry point ---------------------------------------------------------

    def execute(self, query: A.Query) -> ResultSet:
        warnings: list = []
        names, types, rows = self._run(query, None, warnings)
        columns = tuple(ResultColumn(n, t) for n, t in zip(names, types))
        return ResultSet(columns, tuple(rows), tuple(dict.fromkeys(warnings)))

    # -- query ---------------------------------------------------------------

    def _run(self, q: A.Query, parent: Optional[_Ctx], warnings: list):
        sources, rows = self._from(q, parent, warnings)

        def ctx_for(row, group=None, aliases=None):
            return _Ctx(sources, row, group, parent, aliases, warnings)

        if q.where is not None:
            rows = [r for r in rows if _truth(self.eval(q.where, ctx_for(r)), "WHERE") is True]

        grouped = bool(q.group_by) or q.having is not None or any(
            isinstance(i, A.SelectExpr) and A.contains_aggregate(i.expr) for i in q.select_items
        ) or any(not o.positional and A.contains_aggregate(o.key) for o in q.order_by)

        if grouped:
            units = self._group(q, rows, ctx_for)
            contexts = [ctx_for(g[0] if g else self._null_row(sources), group=g) for g in units]
            if q.having is not None:
                contexts = [c for c in contexts if _truth(self.eval(q.having, c), "HAVING") is True]
        else:
            contexts = [ctx_for(r) for r in rows]

        names, types = self._output_layout(q, sources)
        out = [self._project(q, c) for c in contexts]

        if q.order_by:
            alias_keys = self._alias_keys(q, sources)
            keyed = []
            for c, row in zip(contexts, out):
                c.aliases = {k: row[i] for k, i in alias_keys.items()}
                keyed.append((self._order_keys(q, c, row), row))
            keyed.sort(key=functools.cmp_to_key(lambda a, b: self._cmp_keys(q, a[0], b[0])))
            out = [row for _, row in keyed]

        if q.distinct:
            seen = set()
            unique = []
            for row in out:
                key = tuple((_kind(v), v) for v in row)
                if key not in seen:
                    seen.add(key)
                    unique.append(row)
            out = unique

        if q.limit is not None:
            out = out[: q.limit]
        return names, types, out

    @staticmethod
    def _null_row(sources):
        return tuple(None for _ in sources)

    def _from(self, q: A.Query, parent, warnings):
        src, rows = self._source_rows(q.from_, warnings)
        sources = [src]
        combined = [(r,) for r in rows]
        for j in q.joins:
            src, right_rows = self._source_rows(j.source, warnings)
            if any(s.exposed.casefold() == src.exposed.casefold() for s in sources):
                raise ExecutionError(f"table name {src.exposed!r} specified more than once")
            sources = sources + [src]
            combined = self._join(j, sources, combined, right_rows, parent, warnings)
        return sources, combined

    def _source_rows(self, src, warnings):
        if isinstance(src, A.NamedTable):
            table = self.db.table(src.name)
            if table is None:
                raise NoSuchTable(f"no such table: {src.name}")
            source = _Source(src.exposed_name, [c.name for c in table.columns],
                             [c.datatype for c in table.columns])
            return source, list(table.rows)
        names, types, rows = self._run(src.query, None, warnings)
        return _Source(src.alias, list(names), list(types)), [tuple(r) for r in rows]

    def _join(self, j: A.Join, sources, left_rows, right_rows, parent, warnings):
        def on(row):
            if j.on is None:
                return True
            return _truth(self.eval(j.on, _Ctx(sources, row, None, parent, None, warnings)), "ON") is True

        out = []
        if j.kind in ("inner", "cross"):
            for lrow in left_rows:
                for r in right_rows:
                    row = lrow + (r,)
                    if on(row):
                        out.append(row)
        elif j.kind == "left":
            for lrow in left_rows:
                matched = False
                for r in right_rows:
                    row = lrow + (r,)
                    if on(row):
                        out.append(row)
                        matched = True
                if not matched:
                    out.append(lrow + (None,))
        elif j.kind == "right":
            matched_right = set()
            for lrow in left_rows:
                for k, r in enumerate(right_rows):
                    row = lrow + (r,)
                    if on(row):
                        out.append(row)
                        matched_right.add(k)
            pad = tuple(None for _ in sources[:-1])
            out.extend(pad + (r,) for k, r in enumerate(right_rows) if k not in matched_right)
        else:
            raise ExecutionError(f"unsupported join kind {j.kind!r}")
        return out

    def _group(self, q, rows, ctx_for):
        if not q.group_by:
            return [rows]
        groups: dict = {}
        for r in rows:
            c = ctx_for(r)
            key = tuple((_kind(v), v) for v in (self.eval(e, c) for e in q.group_by))
            groups.setdefault(key, []).append(r)
        return list(groups.values())

    # -- projection ----------------------------------------------------------

    def _output_layout(self, q: A.Query, sources):
        names, types = [], []
        for item in q.select_items:
            if isinstance(item, A.Star):
                for s in sources:
                    names.extend(s.names)
                    types.extend(s.types)
            elif isinstance(item, A.QualifiedStar):
                s = self._find_source(sources, item.table)
                names.extend(s.names)
                types.extend(s.types)
            else:
                if item.alias is not None:
                    names.append(item.alias)
                elif isinstance(item.expr, A.ColumnRef):
                    names.append(item.expr.column)
                else:
                    names.append(print_expr(item.expr))
                types.append(self.infer_type(item.expr, sources))
        return names, types

    @staticmethod
    def _find_source(sources, name):
        for s in sources:
            if s.exposed.casefold() == name.casefold():
                return s
        raise NoSuchTable(f"no such table or alias: {name}")

    def _project(self, q: A.Query, ctx: _Ctx) -> tuple:
        out = []
        for item in q.select_items:
            if isinstance(item, A.Star):
                for i, s in enumerate(ctx.sources):
                    vals = ctx.row[i]
                    out.extend(vals if vals is not None else [None] * len(s.names))
            elif isinstance(item, A.QualifiedStar):
                s = self._find_source(ctx.sources, item.table)
                vals = ctx.row[ctx.sources.index(s)]
                out.extend(vals if vals is not None else [None] * len(s.names))
            else:
                out.append(self.eval(item.expr, ctx))
        return tuple(out)

    # -- ordering ------------------------------------------------------------

    def _alias_keys(self, q, sources) -> dict:
        """Output position of every select-list alias."""
        keys = {}
        idx = 0
        for item in q.select_items:
            if isinstance(item, A.Star):
                idx += sum(len(s.names) for s in sources)
            elif isinstance(item, A.QualifiedStar):
                idx += len(self._find_source(sources, item.table).names)
            else:
                if item.alias is not None:
                    keys.setdefault(item.alias.casefold(), idx)
                idx += 1
        return keys

    def _order_keys(self, q, ctx, row):
        keys = []
        for o in q.order_by:
            if o.positional:
                if not 1 <= o.key <= len(row):
                    raise ExecutionError(f"ORDER BY position {o.key} out of range")
                keys.append(row[o.key - 1])
            else:
                keys.append(self.eval(o.key, ctx))
        return keys

    @staticmethod
    def _cmp_keys(q, ka, kb) -> int:
        for o, a, b in zip(q.order_by, ka, kb):
            if a is None and b is None:
                continue
            if a is None:
                return 1
            if b is None:
                return -1
            c = compare(a, b)
            if c:
                return -c if o.descending else c
        return 0

    # -- expressions ---------------------------------------------------------

    def lookup(self, ref: A.ColumnRef, ctx: _Ctx):
        level = ctx
        while level is not None:
            hit = self._lookup_level(ref, level)
            if hit is not None:
                si, ci = hit
                vals = level.row[si]
                return None if vals is None else vals[ci]
            level = level.parent
        where = f"{ref.qualifier}.{ref.column}" if ref.qualifier else ref.column
        raise NoSuchColumn(f"no such column: {where}")

    @staticmethod
    def _lookup_level(ref: A.ColumnRef, ctx: _Ctx):
        col = ref.column.casefold()
        if ref.qualifier is not None:
            q = ref.qualifier.casefold()
            for si, s in enumerate(ctx.sources):
                if s.exposed.casefold() == q:
                    for ci, n in enumerate(s.names):
                        if n.casefold() == col:
                            return si, ci
                    raise NoSuchColumn(f"no such column: {ref.qualifier}.{ref.column}")
            return None
        hits = [
            (si, ci)
            for si, s in enumerate(ctx.sources)
            for ci, n in enumerate(s.names)
            if n.casefold() == col
        ]
        if len({si for si, _ in hits}) > 1:
            raise ExecutionError(f"ambiguous column name: {ref.column}")
        return hits[0] if hits else None

    def eval(self, e, ctx: _Ctx):
        if isinstance(e, A.ColumnRef):
            if e.qualifier is None and ctx.aliases and e.column.casefold() in ctx.aliases:
                return ctx.aliases[e.column.casefold()]
            return self.lookup(e, ctx)
        if isinstance(e, A.NumberLiteral):
            return _number(e.text)
        if isinstance(e, A.StringLiteral):
            return e.value
        if isinstance(e, A.BoolLiteral):
            return e.value
        if isinstance(e, A.NullLiteral):
            return None
        if isinstance(e, A.Paren):
            return self.eval(e.expr, ctx)
        if isinstance(e, A.Unary):
            v = self.eval(e.operand, ctx)
            if e.op == "NOT":
                v = _truth(v, "NOT operand")
                return None if v is None else not v
            if v is None:
                return None
            if not _is_num(v):
                raise SqlTypeError(f"cannot negate {v!r}")
            return -v
        if isinstance(e, A.Binary):
            return self._binary(e, ctx)
        if isinstance(e, A.FunctionCall):
            return self._call(e, ctx)
        if isinstance(e, A.Subquery):
            _, _, rows = self._subquery(e.query, ctx, single_column=True)
            if len(rows) > 1:
                raise ExecutionError("scalar subquery returned more than one row")
            return rows[0][0] if rows else None
        if isinstance(e, A.ExprList):
            raise ExecutionError("a parenthesised list is only valid after IN")
        raise ExecutionError(f"cannot evaluate {e!r}")

    def _subquery(self, q, ctx, single_column):
        names, types, rows = self._run(q, ctx, ctx.warnings)
        if single_column and len(names) != 1:
            raise ExecutionError("subquery must return exactly one column")
        return names, types, rows

    def _binary(self, e: A.Binary, ctx: _Ctx):
        op = e.op
        if op == "AND":
            a = _truth(self.eval(e.left, ctx), "AND operand")
            if a is False:
                return False
            b = _truth(self.eval(e.right, ctx), "AND operand")
            if b is False:
                return False
            return None if a is None or b is None else True
        if op == "OR":
            a = _truth(self.eval(e.left, ctx), "OR operand")
            if a is True:
                return True
            b = _truth(self.eval(e.right, ctx), "OR operand")
            if b is True:
                return True
            return None if a is None or b is None else False
        if op in ("IS", "IS NOT"):
            v = self.eval(e.left, ctx)
            return (v is None) if op == "IS" else (v is not None)
        if op == "IN":
            return self._in(e, ctx)

        a = self.eval(e.left, ctx)
        b = self.eval(e.right, ctx)
        if a is None or b is None:
            return None
        if op in A.COMPARISON_OPS:
            c = compare(a, b)
            return {"=": c == 0, "<>": c != 0, "<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0}[op]
        if op == "LIKE":
            if not isinstance(a, str) or not isinstance(b, str):
                raise SqlTypeError("LIKE needs string operands")
            return _like_regex(b).fullmatch(a) is not None
        if not (_is_num(a) and _is_num(b)):
            raise SqlTypeError(f"operator {op} needs numeric operands, got {a!r} and {b!r}")
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                ctx.warnings.append("division by zero produced NULL")
                return None
            return a / b
        raise ExecutionError(f"unknown operator {op}")

    def _in(self, e: A.Binary, ctx: _Ctx):
        left = self.eval(e.left, ctx)
        if isinstance(e.right, A.Subquery):
            _, _, rows = self._subquery(e.right.query, ctx, single_column=True)
            candidates = [r[0] for r in rows]
        elif isinstance(e.right, A.ExprList):
            candidates = [self.eval(x, ctx) for x in e.right.items]
        else:
            raise ExecutionError("IN needs a list or a subquery")
        if left is None:
            return None
        saw_null = False
        for c in candidates:
            if c is None:
                saw_null = True
            elif compare(left, c) == 0:
                return True
        return None if saw_null else False

    def _call(self, e: A.FunctionCall, ctx: _Ctx):
        name = e.name.upper()
        if name in A.AGGREGATES:
            return self._aggregate(name, e, ctx)
        args = [self.eval(a, ctx) for a in e.args]
        if name == "COALESCE":
            return next((a for a in args if a is not None), None)
        fn = _SCALARS.get(name)
        if fn is None:
            raise ExecutionError(f"unknown function {e.name}")
        arity, impl = fn
        if len(args) not in arity:
            raise ExecutionError(f"wrong number of arguments to {e.name}")
        if any(a is None for a in args):
            return None
        return impl(*args)

    def _aggregate(self, name: str, e: A.FunctionCall, ctx: _Ctx):
        if ctx.group is None:
            raise ExecutionError(f"aggregate {e.name} used outside an aggregating context")
        if e.star_arg:
            if name != "COUNT":
                raise ExecutionError(f"{e.name}(*) is not supported")
            return len(ctx.group)
        if len(e.args) != 1:
            raise ExecutionError(f"{e.name} takes exactly one argument")
        values = []
        for r in ctx.group:
            inner = _Ctx(ctx.sources, r, None, ctx.parent, None, ctx.warnings)
            v = self.eval(e.args[0], inner)
            if v is not None:
                values.append(v)
        if name == "COUNT":
            return len(values)
        if not values:
            return None
        if name in ("SUM", "AVG"):
            if not all(_is_num(v) for v in values):
                raise SqlTypeError(f"{e.name} needs numeric input")
            total = values[0]
            for v in values[1:]:
                total = total + v
            return total if name == "SUM" else total / len(values)
        best = values[0]
        for v in values[1:]:
            c = compare(v, best)
            if (name == "MIN" and c < 0) or (name == "MAX" and c > 0):
                best = v
        return best

    # -- static typing -------------------------------------------------------

    def infer_type(self, e, sources) -> str:
        if isinstance(e, A.ColumnRef):
            q = e.qualifier.casefold() if e.qualifier else None
            for s in sources:
                if q is not None and s.exposed.casefold() != q:
                    continue
                for n, t in zip(s.names, s.types):
                    if n.casefold() == e.column.casefold():
                        return t
            return "string"  # outer reference or ORDER BY alias
        if isinstance(e, A.NumberLiteral):
            return "float" if isinstance(_number(e.text), float) else "int"
        if isinstance(e, A.StringLiteral):
            return "string"
        if isinstance(e, A.BoolLiteral):
            return "bool"
        if isinstance(e, A.NullLiteral):
            return "string"
        if isinstance(e, A.Paren):
            return self.infer_type(e.expr, sources)
        if isinstance(e, A.Unary):
            return "bool" if e.op == "NOT" else self.infer_type(e.operand, sources)
        if isinstance(e, A.Binary):
            if e.op in ("+", "-", "*"):
                lt, rt = self.infer_type(e.left, sources), self.infer_type(e.right, sources)
                return "int" if lt == rt == "int" else "float"
            if e.op == "/":
                return "float"
            return "bool"
        if isinstance(e, A.FunctionCall):
            name = e.name.upper()
            if name in ("COUNT", "LENGTH"):
                return "int"
            if name in ("AVG", "ROUND"):
                return "float"
            if name in ("UPPER", "LOWER"):
                return "string"
            if e.args:
                return self.infer_type(e.args[0], sources)
            return "string"
        if isinstance(e, A.Subquery):
            inner, _ = self._from_layout(e.query)
            item = e.query.select_items[0]
            if isinstance(item, A.SelectExpr):
                return self.infer_type(item.expr, inner + sources)
            return inner[0].types[0] if inner and inner[0].types else "string"
        return "string"

    def _from_layout(self, q: A.Query):
        layout = []
        for src in q.sources:
            if isinstance(src, A.NamedTable):
                t = self.db.table(src.name)
                if t is None:
                    raise NoSuchTable(f"no such table: {src.name}")
                layout.append(_Source(src.exposed_name, [c.name for c in t.columns],
                                      [c.datatype for c in t.columns]))
            else:
                inner, _ = self._from_layout(src.query)
                names, types = self._output_layout(src.query, inner)
                layout.append(_Source(src.alias, names, types))
        return layout, None


def _number(text: str):
    if re.fullmatch(r"\d+", text):
        return int(text)
    return float(text)


def _round(x, digits=0):
    if not _is_num(x) or not _is_num(digits):
        raise SqlTypeError("ROUND needs numeric arguments")
    return float(round(x, int(digits)))


def _str_fn(fn):
    def impl(x):
        if not isinstance(x, str):
            raise SqlTypeError("string function applied to non-string")
        return fn(x)
    return impl


def _abs(x):
    if not _is_num(x):
        raise SqlTypeError("ABS needs a number")
    return abs(x)


_SCALARS = {
    "UPPER": ((1,), _str_fn(str.upper)),
    "LOWER": ((1,), _str_fn(str.lower)),
    "LENGTH": ((1,), _str_fn(len)),
    "ABS": ((1,), _abs),
    "ROUND": ((1, 2), _round),
}


def execute(db: EmbeddedDatabase, query: A.Query) -> ResultSet:
    return Engine(db).execute(query)


__all__ = [
    "ColumnDef", "EmbeddedDatabase", "Engine", "ResultColumn", "ResultSet", "StoredTable",
    "compare", "execute",
]
