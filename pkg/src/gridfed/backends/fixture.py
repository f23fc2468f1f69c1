"""Reader for fixture scripts that populate an :class:`EmbeddedDatabase`.

Only two statement forms are understood::

    CREATE TABLE name (column type, ...);
    INSERT INTO name VALUES (value, ...)[, (value, ...)];

``type`` is one of string, int, float, bool, date. Values are quoted
strings, numbers (optionally negative), TRUE, FALSE or NULL. ``--``
comments run to end of line.
"""
from __future__ import annotations

import datetime

from ..errors import FixtureSyntaxError, ParseError, SchemaInvalid, TypeMismatch
from ..schema_model import DATATYPES, ColumnDef
from ..sql.lexer import tokenize
from .engine import EmbeddedDatabase, StoredTable


def coerce_value(table: str, column: ColumnDef, value):
    """Check ``value`` against the column type; ints widen to float columns."""
    if value is None:
        return None
    t = column.datatype
    ok = (
        (t == "string" and isinstance(value, str))
        or (t == "int" and isinstance(value, int) and not isinstance(value, bool))
        or (t == "float" and isinstance(value, (int, float)) and not isinstance(value, bool))
        or (t == "bool" and isinstance(value, bool))
        or (t == "date" and isinstance(value, str) and _is_date(value))
    )
    if not ok:
        raise TypeMismatch(table, column.name, value)
    return float(value) if t == "float" else value


def _is_date(text: str) -> bool:
    try:
        datetime.date.fromisoformat(text)
    except ValueError:
        return False
    return len(text) == 10


class _Reader:
    def __init__(self, script: str):
        try:
            self.tokens = tokenize(script)
        except ParseError as exc:
            raise FixtureSyntaxError(exc.position, exc.message) from None
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def fail(self, message):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.value)
        raise FixtureSyntaxError(t.pos, f"{message}, found {found}")

    def keyword(self, word):
        if self.tok.kind == "keyword" and self.tok.value == word:
            self.i += 1
        else:
            self.fail(f"expected {word}")

    def op(self, value):
        if self.tok.kind == "op" and self.tok.value == value:
            self.i += 1
        else:
            self.fail(f"expected {value!r}")

    def at_op(self, value):
        return self.tok.kind == "op" and self.tok.value == value

    def name(self, what):
        if self.tok.kind != "ident":
            self.fail(f"expected {what}")
        self.i += 1
        return self.tokens[self.i - 1].value

    def value(self):
        t = self.tok
        negative = False
        if t.kind == "op" and t.value == "-":
            negative = True
            self.i += 1
            t = self.tok
        if t.kind == "number":
            self.i += 1
            v = int(t.value) if t.value.isdigit() else float(t.value)
            return -v if negative else v
        if negative:
            self.fail("expected number after '-'")
        if t.kind == "string":
            self.i += 1
            return t.value
        if t.kind == "keyword" and t.value in ("TRUE", "FALSE", "NULL"):
            self.i += 1
            return {"TRUE": True, "FALSE": False, "NULL": None}[t.value]
        self.fail("expected a literal value")


def load_fixture(db: EmbeddedDatabase, script: str) -> EmbeddedDatabase:
    """Apply ``script`` to ``db`` and return the resulting database."""
    r = _Reader(script)
    while r.tok.kind != "eof":
        if r.at_op(";"):
            r.i += 1
            continue
        head = r.tok
        if head.kind == "keyword" and head.value == "CREATE":
            db = _create(r, db)
        elif head.kind == "keyword" and head.value == "INSERT":
            db = _insert(r, db)
        else:
            r.fail("expected CREATE TABLE or INSERT INTO")
        if r.tok.kind != "eof":
            r.op(";")
    return db


def _create(r: _Reader, db: EmbeddedDatabase) -> EmbeddedDatabase:
    r.keyword("CREATE")
    r.keyword("TABLE")
    pos = r.tok.pos
    name = r.name("table name")
    if db.table(name) is not None:
        raise FixtureSyntaxError(pos, f"table {name!r} already exists")
    r.op("(")
    columns = []
    while True:
        col_pos = r.tok.pos
        col = r.name("column name")
        type_tok = r.tok
        dtype = r.name("column type").lower()
        if dtype not in DATATYPES:
            raise FixtureSyntaxError(type_tok.pos, f"unknown column type {type_tok.value!r}")
        if any(c.name.casefold() == col.casefold() for c in columns):
            raise FixtureSyntaxError(col_pos, f"duplicate column {col!r}")
        try:
            columns.append(ColumnDef(col, dtype))
        except SchemaInvalid as exc:
            raise FixtureSyntaxError(col_pos, str(exc)) from None
        if r.at_op(","):
            r.i += 1
            continue
        r.op(")")
        break
    return db.with_table(StoredTable(name, tuple(columns), ()))


def _insert(r: _Reader, db: EmbeddedDatabase) -> EmbeddedDatabase:
    r.keyword("INSERT")
    r.keyword("INTO")
    pos = r.tok.pos
    name = r.name("table name")
    table = db.table(name)
    if table is None:
        raise FixtureSyntaxError(pos, f"no such table {name!r}")
    r.keyword("VALUES")
    rows = list(table.rows)
    while True:
        row_pos = r.tok.pos
        r.op("(")
        values = [r.value()]
        while r.at_op(","):
            r.i += 1
            values.append(r.value())
        r.op(")")
        if len(values) != len(table.columns):
            raise FixtureSyntaxError(
                row_pos,
                f"table {table.name} has {len(table.columns)} columns but {len(values)} values were given",
            )
        rows.append(tuple(coerce_value(table.name, c, v) for c, v in zip(table.columns, values)))
        if r.at_op(","):
            r.i += 1
            continue
        break
    return db.with_table(StoredTable(table.name, table.columns, tuple(rows)))


def dump_fixture(db: EmbeddedDatabase) -> str:
    """Script that recreates ``db`` via :func:`load_fixture`."""
    from ..sql.printer import quote_ident, quote_string

    def lit(v):
        if v is None:
            return "NULL"
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, str):
            return quote_string(v)
        return repr(v)

    lines = []
    for t in db.tables:
        cols = ", ".join(f"{quote_ident(c.name)} {c.datatype}" for c in t.columns)
        lines.append(f"CREATE TABLE {quote_ident(t.name)} ({cols});")
        for row in t.rows:
            lines.append(f"INSERT INTO {quote_ident(t.name)} VALUES ({', '.join(lit(v) for v in row)});")
    return "\n".join(lines) + ("\n" if lines else "")
