"""Translate center-schema queries into a member's local vocabulary.

:func:`resolve` binds every table and column reference of a parsed query
to the virtual schema; :func:`rewrite` then swaps center names for the
member's names from its :class:`~gridfed.schema_model.MemberMapping`.

The rewritten select list labels every plain column with its center name
(``STUNM AS studentname``) and ``*`` is spelled out in center column order,
so member result sets come back already in center vocabulary. Unaliased
computed select items are labelled with their center spelling too
(``UPPER(STUNM) AS "UPPER(studentname)"``).

Locations inside an AST are addressed by *paths*: tuples of
``(field_name, index_or_None)`` steps from the root query.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import (
    AmbiguousColumn,
    DuplicateTableName,
    MappingIncompleteColumn,
    MappingIncompleteTable,
    UnknownColumn,
    UnknownQualifier,
    UnknownTable,
)
from .schema_model import MemberMapping, TableDef, VirtualSchema
from .sql import ast as A
from .sql.parser import parse
from .sql.printer import print_expr, print_query

Path = tuple


def _fold(name: str) -> str:
    return name.casefold()


@dataclass(frozen=True, eq=False)
class ScopeEntry:
    """One FROM-clause source as seen by name resolution."""

    exposed: str
    table: Optional[TableDef] = None  # named center table
    columns: tuple = ()  # output names of a derived table
    aliased: bool = False

    @property
    def derived(self) -> bool:
        return self.table is None

    def has_column(self, name: str) -> bool:
        if self.table is not None:
            return self.table.column(name) is not None
        return any(_fold(c) == _fold(name) for c in self.columns if c is not None)

    def column_name(self, name: str) -> str:
        """Canonical spelling of ``name`` within this source."""
        if self.table is not None:
            return self.table.column(name).name
        return next(c for c in self.columns if c is not None and _fold(c) == _fold(name))


@dataclass(frozen=True)
class ColumnBinding:
    """What a ColumnRef occurrence refers to.

    ``source`` is ``"table"`` for a center table column, ``"derived"`` for an
    output column of a derived table and ``"output"`` for an ORDER BY
    reference to a select-list alias.
    """

    source: str
    center_column: str
    center_table: Optional[str] = None
    entry: Optional[ScopeEntry] = field(default=None, compare=False)
    # sources that could capture this name once unqualified names are swapped
    neighbours: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class StarExpansion:
    entries: tuple  # ((ScopeEntry, center column name), ...)
    qualify: bool


@dataclass
class ResolvedQuery:
    ast: A.Query
    bindings: dict = field(default_factory=dict)
    table_bindings: dict = field(default_factory=dict)
    stars: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# resolution
# ---------------------------------------------------------------------------


def resolve(ast: A.Query, schema: VirtualSchema) -> ResolvedQuery:
    """Bind each table/column occurrence in ``ast`` to ``schema``.

    Raises UnknownTable, UnknownColumn, AmbiguousColumn or UnknownQualifier.
    """
    resolved = ResolvedQuery(ast)
    _Resolver(schema, resolved).query(ast, (), [])
    return resolved


class _Resolver:
    def __init__(self, schema: VirtualSchema, out: ResolvedQuery):
        self.schema = schema
        self.out = out

    def query(self, q: A.Query, path: Path, outer: list) -> list:
        """Resolve ``q``; return its output column names."""
        entries: list = []
        self.source(q.from_, path + (("from_", None),), entries)
        for i, j in enumerate(q.joins):
            jpath = path + (("joins", i),)
            self.source(j.source, jpath + (("source", None),), entries)
            if j.on is not None:
                self.expr(j.on, jpath + (("on", None),), [list(entries)] + outer)
        scopes = [entries] + outer

        outputs: list = []
        for i, item in enumerate(q.select_items):
            ipath = path + (("select_items", i),)
            if isinstance(item, A.SelectExpr):
                self.expr(item.expr, ipath + (("expr", None),), scopes)
                if item.alias is not None:
                    outputs.append(item.alias)
                elif isinstance(item.expr, A.ColumnRef):
                    outputs.append(self.out.bindings[ipath + (("expr", None),)].center_column)
                else:
                    outputs.append(print_expr(item.expr))
            else:
                expansion = self.star(item, entries)
                self.out.stars[ipath] = expansion
                outputs.extend(col for _, col in expansion.entries)

        if q.where is not None:
            self.expr(q.where, path + (("where", None),), scopes)
        for i, e in enumerate(q.group_by):
            self.expr(e, path + (("group_by", i),), scopes)
        if q.having is not None:
            self.expr(q.having, path + (("having", None),), scopes)

        aliases = {
            _fold(it.alias): it.alias
            for it in q.select_items
            if isinstance(it, A.SelectExpr) and it.alias is not None
        }
        for i, o in enumerate(q.order_by):
            if o.positional:
                continue
            self.expr(o.key, path + (("order_by", i), ("key", None)), scopes, aliases)
        return outputs

    def source(self, src, path: Path, entries: list) -> None:
        if isinstance(src, A.NamedTable):
            table = self.schema.table(src.name)
            if table is None:
                raise UnknownTable(src.name)
            self.out.table_bindings[path] = table.name
            entry = ScopeEntry(src.exposed_name, table=table, aliased=src.alias is not None)
        else:
            # derived tables cannot see sibling or outer sources
            cols = self.query(src.query, path + (("query", None),), [])
            entry = ScopeEntry(src.alias, columns=tuple(cols), aliased=True)
        if any(_fold(e.exposed) == _fold(entry.exposed) for e in entries):
            raise DuplicateTableName(entry.exposed)
        entries.append(entry)

    def star(self, item, entries: list) -> StarExpansion:
        if isinstance(item, A.QualifiedStar):
            chosen = [e for e in entries if _fold(e.exposed) == _fold(item.table)]
            if not chosen:
                raise UnknownQualifier(item.table)
            qualify = True
        else:
            chosen = entries
            qualify = len(entries) > 1
        pairs = []
        for e in chosen:
            names = [c.name for c in e.table.columns] if e.table is not None else [c for c in e.columns if c]
            if len({_fold(n) for n in names}) != len(names):
                dup = next(n for n in names if sum(_fold(m) == _fold(n) for m in names) > 1)
                raise AmbiguousColumn(dup, [e.exposed, e.exposed])
            pairs.extend((e, n) for n in names)
        return StarExpansion(tuple(pairs), qualify)

    def expr(self, expr, path: Path, scopes: list, aliases=None) -> None:
        if isinstance(expr, A.ColumnRef):
            self.out.bindings[path] = self.column(expr, scopes, aliases)
            return
        if isinstance(expr, A.Subquery):
            self.query(expr.query, path + (("query", None),), scopes)
            return
        for name, idx, child in A.children(expr):
            self.expr(child, path + ((name, idx),), scopes, aliases)

    def column(self, ref: A.ColumnRef, scopes: list, aliases) -> ColumnBinding:
        if ref.qualifier is not None:
            for level in scopes:
                for e in level:
                    if _fold(e.exposed) == _fold(ref.qualifier):
                        if not e.has_column(ref.column):
                            raise UnknownColumn(e.exposed, ref.column)
                        return self._bind(e, ref.column, ())
            raise UnknownQualifier(ref.qualifier)

        if aliases and _fold(ref.column) in aliases:
            return ColumnBinding("output", aliases[_fold(ref.column)])

        seen: list = []
        for level in scopes:
            matches = [e for e in level if e.has_column(ref.column)]
            if len(matches) > 1:
                raise AmbiguousColumn(ref.column, [m.exposed for m in matches])
            if matches:
                neighbours = tuple(seen + [e for e in level if e is not matches[0]])
                return self._bind(matches[0], ref.column, neighbours)
            seen.extend(level)
        raise UnknownColumn(None, ref.column)

    @staticmethod
    def _bind(entry: ScopeEntry, column: str, neighbours: tuple) -> ColumnBinding:
        if entry.table is None and sum(1 for c in entry.columns if c and _fold(c) == _fold(column)) > 1:
            raise AmbiguousColumn(column, [entry.exposed, entry.exposed])
        name = entry.column_name(column)
        if entry.table is not None:
            return ColumnBinding("table", name, entry.table.name, entry, neighbours)
        return ColumnBinding("derived", name, None, entry, neighbours)


# ---------------------------------------------------------------------------
# rewriting
# ---------------------------------------------------------------------------


def rewrite(resolved: ResolvedQuery, mapping: MemberMapping) -> A.Query:
    """Swap center names in ``resolved.ast`` for the member names in ``mapping``.

    Raises MappingIncompleteTable / MappingIncompleteColumn naming the first
    center table or column the query needs but the mapping lacks.
    """
    return _Rewriter(resolved, mapping).query(resolved.ast, ())


class _Rewriter:
    def __init__(self, resolved: ResolvedQuery, mapping: MemberMapping):
        self.r = resolved
        self.mapping = mapping

    # -- name lookups --------------------------------------------------------

    def grid_table(self, center_table: str) -> str:
        tm = self.mapping.table(center_table)
        if tm is None:
            raise MappingIncompleteTable(center_table)
        return tm.grid_table

    def grid_column(self, center_table: str, center_column: str) -> str:
        tm = self.mapping.table(center_table)
        if tm is None:
            raise MappingIncompleteTable(center_table)
        cm = tm.column(center_column)
        if cm is None:
            raise MappingIncompleteColumn(tm.center_table, center_column)
        return cm.grid_column

    def exposed(self, entry: ScopeEntry) -> str:
        if entry.table is not None and not entry.aliased:
            return self.grid_table(entry.table.name)
        return entry.exposed

    def member_columns(self, entry: ScopeEntry) -> set:
        if entry.table is None:
            return {_fold(c) for c in entry.columns if c}
        tm = self.mapping.table(entry.table.name)
        return {_fold(cm.grid_column) for cm in tm.columns} if tm else set()

    # -- tree ----------------------------------------------------------------

    def query(self, q: A.Query, path: Path) -> A.Query:
        items = []
        for i, item in enumerate(q.select_items):
            ipath = path + (("select_items", i),)
            if isinstance(item, A.SelectExpr):
                epath = ipath + (("expr", None),)
                expr = self.expr(item.expr, epath)
                alias = item.alias
                if alias is None and isinstance(item.expr, A.ColumnRef):
                    alias = self.r.bindings[epath].center_column
                elif alias is None:
                    # computed result columns keep their center spelling on every member
                    alias = print_expr(item.expr)
                items.append(A.SelectExpr(expr, alias))
            else:
                items.extend(self.expand(self.r.stars[ipath]))

        joins = []
        for i, j in enumerate(q.joins):
            jpath = path + (("joins", i),)
            on = self.expr(j.on, jpath + (("on", None),)) if j.on is not None else None
            joins.append(A.Join(j.kind, self.source(j.source, jpath + (("source", None),)), on))

        order_by = []
        out_aliases = {_fold(it.alias): it for it in items if it.alias is not None}
        for i, o in enumerate(q.order_by):
            if o.positional:
                order_by.append(o)
                continue
            kpath = path + (("order_by", i), ("key", None))
            key = self.expr(o.key, kpath)
            key = self.guard_order_key(o.key, key, kpath, out_aliases)
            order_by.append(A.OrderItem(key, o.descending))

        return A.Query(
            select_items=tuple(items),
            from_=self.source(q.from_, path + (("from_", None),)),
            joins=tuple(joins),
            where=self.expr(q.where, path + (("where", None),)) if q.where is not None else None,
            group_by=tuple(self.expr(e, path + (("group_by", i),)) for i, e in enumerate(q.group_by)),
            having=self.expr(q.having, path + (("having", None),)) if q.having is not None else None,
            order_by=tuple(order_by),
            limit=q.limit,
            distinct=q.distinct,
        )

    def source(self, src, path: Path):
        if isinstance(src, A.NamedTable):
            return A.NamedTable(self.grid_table(self.r.table_bindings[path]), src.alias)
        return A.DerivedTable(self.query(src.query, path + (("query", None),)), src.alias)

    def expand(self, star: StarExpansion) -> list:
        items = []
        for entry, col in star.entries:
            name = self.grid_column(entry.table.name, col) if entry.table is not None else col
            qualifier = self.exposed(entry) if star.qualify else None
            items.append(A.SelectExpr(A.ColumnRef(name, qualifier), col))
        return items

    def expr(self, expr, path: Path):
        if isinstance(expr, A.ColumnRef):
            return self.column(expr, self.r.bindings[path])
        if isinstance(expr, A.Subquery):
            return A.Subquery(self.query(expr.query, path + (("query", None),)))
        changes = {}
        for name, idx, child in A.children(expr):
            new = self.expr(child, path + ((name, idx),))
            if idx is None:
                changes[name] = new
            else:
                changes.setdefault(name, list(getattr(expr, name)))[idx] = new
        changes = {k: tuple(v) if isinstance(v, list) else v for k, v in changes.items()}
        return replace(expr, **changes) if changes else expr

    def column(self, ref: A.ColumnRef, b: ColumnBinding) -> A.ColumnRef:
        if b.source == "output":
            return ref
        if b.source == "derived":
            return ref
        name = self.grid_column(b.center_table, b.center_column)
        if ref.qualifier is not None:
            qualifier = ref.qualifier if b.entry.aliased else self.grid_table(b.center_table)
            return A.ColumnRef(name, qualifier)
        # a neighbouring source exposing the same member name would capture it
        if any(_fold(name) in self.member_columns(n) for n in b.neighbours):
            return A.ColumnRef(name, self.exposed(b.entry))
        return A.ColumnRef(name)

    def guard_order_key(self, original, key, kpath, out_aliases):
        """Qualify an ORDER BY column that a select alias would otherwise shadow."""
        if not isinstance(key, A.ColumnRef) or key.qualifier is not None:
            return key
        b = self.r.bindings[kpath]
        if b.source != "table":
            return key
        item = out_aliases.get(_fold(key.column))
        if item is None:
            return key
        if isinstance(item.expr, A.ColumnRef) and _fold(item.expr.column) == _fold(key.column) \
                and _fold(item.alias) == _fold(b.center_column):
            return key
        return A.ColumnRef(key.column, self.exposed(b.entry))


def rewrite_sql(sql: str, schema: VirtualSchema, mapping: MemberMapping) -> str:
    """Parse, resolve, rewrite and print in one step."""
    return print_query(rewrite(resolve(parse(sql), schema), mapping))
