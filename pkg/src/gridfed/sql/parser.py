"""Recursive-descent parser for the supported SELECT dialect.

See ``grammar.ebnf`` at the repository root for the grammar. Precedence,
lowest first: OR, AND, NOT, comparison/LIKE/IN/IS, additive,
multiplicative, unary minus.
"""
from __future__ import annotations

from ..errors import ParseError
from . import ast as A
from .lexer import WRITE_HEADS, Token, tokenize


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_kw(self, *words) -> bool:
        return self.tok.kind == "keyword" and self.tok.value in words

    def at_op(self, *ops) -> bool:
        return self.tok.kind == "op" and self.tok.value in ops

    def accept_kw(self, word) -> bool:
        if self.at_kw(word):
            self.advance()
            return True
        return False

    def accept_op(self, op) -> bool:
        if self.at_op(op):
            self.advance()
            return True
        return False

    def expect_kw(self, word):
        if not self.accept_kw(word):
            self.error(f"expected {word}")

    def expect_op(self, op):
        if not self.accept_op(op):
            self.error(f"expected {op!r}")

    def error(self, message, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        raise ParseError(tok.pos, f"{message}, found {found}")

    def identifier(self, what="identifier") -> str:
        if self.tok.kind != "ident":
            self.error(f"expected {what}")
        return self.advance().value

    # -- statements ----------------------------------------------------------

    def parse_statement(self) -> A.Query:
        tok = self.tok
        if tok.kind == "eof":
            raise ParseError(tok.pos, "empty statement")
        if tok.kind == "keyword" and tok.value in WRITE_HEADS:
            raise ParseError(tok.pos, f"only SELECT statements are supported, found {tok.value}")
        if not self.at_kw("SELECT"):
            self.error("expected SELECT")
        q = self.parse_query()
        self.accept_op(";")
        if self.tok.kind != "eof":
            self.error("unexpected token after end of statement")
        return q

    def parse_query(self) -> A.Query:
        self.expect_kw("SELECT")
        distinct = self.accept_kw("DISTINCT")
        items = [self.parse_select_item()]
        while self.accept_op(","):
            items.append(self.parse_select_item())

        self.expect_kw("FROM")
        source = self.parse_table_source()
        joins = []
        while True:
            if self.accept_op(","):
                joins.append(A.Join("cross", self.parse_table_source()))
                continue
            join = self.parse_join()
            if join is None:
                break
            joins.append(join)

        where = self.parse_expr() if self.accept_kw("WHERE") else None

        group_by = []
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            group_by.append(self.parse_expr())
            while self.accept_op(","):
                group_by.append(self.parse_expr())

        having = None
        having_tok = self.tok
        if self.accept_kw("HAVING"):
            having = self.parse_expr()

        order_by = []
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            order_by.append(self.parse_order_item())
            while self.accept_op(","):
                order_by.append(self.parse_order_item())

        limit = None
        if self.accept_kw("LIMIT"):
            if self.tok.kind != "number" or not self.tok.value.isdigit():
                self.error("LIMIT takes a non-negative integer")
            limit = int(self.advance().value)

        query = A.Query(
            select_items=tuple(items),
            from_=source,
            joins=tuple(joins),
            where=where,
            group_by=tuple(group_by),
            having=having,
            order_by=tuple(order_by),
            limit=limit,
            distinct=distinct,
        )
        if having is not None and not group_by and not any(
            isinstance(it, A.SelectExpr) and A.contains_aggregate(it.expr) for it in items
        ):
            raise ParseError(having_tok.pos, "HAVING needs GROUP BY or an aggregate in the select list")
        return query

    def parse_select_item(self):
        if self.accept_op("*"):
            return A.Star()
        if self.tok.kind == "ident" and self.peek().value == "." and self.peek(2).value == "*" \
                and self.peek().kind == "op" and self.peek(2).kind == "op":
            table = self.advance().value
            self.advance()
            self.advance()
            return A.QualifiedStar(table)
        expr = self.parse_expr()
        return A.SelectExpr(expr, self.parse_alias())

    def parse_alias(self):
        if self.accept_kw("AS"):
            return self.identifier("alias")
        if self.tok.kind == "ident":
            return self.advance().value
        return None

    def parse_table_source(self):
        if self.at_op("("):
            open_tok = self.advance()
            if not self.at_kw("SELECT"):
                self.error("expected SELECT in derived table")
            sub = self.parse_query()
            self.expect_op(")")
            alias = self.parse_alias()
            if alias is None:
                raise ParseError(open_tok.pos, "derived table requires an alias")
            return A.DerivedTable(sub, alias)
        name = self.identifier("table name")
        return A.NamedTable(name, self.parse_alias())

    def parse_join(self):
        if self.accept_kw("CROSS"):
            self.expect_kw("JOIN")
            return A.Join("cross", self.parse_table_source())
        if self.accept_kw("JOIN"):
            kind = "inner"
        elif self.accept_kw("INNER"):
            self.expect_kw("JOIN")
            kind = "inner"
        elif self.at_kw("LEFT", "RIGHT"):
            kind = self.advance().value.lower()
            self.accept_kw("OUTER")
            self.expect_kw("JOIN")
        else:
            return None
        source = self.parse_table_source()
        self.expect_kw("ON")
        return A.Join(kind, source, self.parse_expr())

    def parse_order_item(self):
        if self.tok.kind == "number" and self.tok.value.isdigit() and \
                (self.peek().kind == "eof" or self.peek().value in (",", ";", ")", "ASC", "DESC", "LIMIT")):
            tok = self.advance()
            position = int(tok.value)
            if position < 1:
                raise ParseError(tok.pos, "ORDER BY position must be at least 1")
            key = position
        else:
            key = self.parse_expr()
        descending = False
        if self.accept_kw("DESC"):
            descending = True
        else:
            self.accept_kw("ASC")
        return A.OrderItem(key, descending)

    # -- expressions ---------------------------------------------------------

    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        left = self.parse_and()
        while self.accept_kw("OR"):
            left = A.Binary("OR", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_not()
        while self.accept_kw("AND"):
            left = A.Binary("AND", left, self.parse_not())
        return left

    def parse_not(self):
        if self.accept_kw("NOT"):
            return A.Unary("NOT", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self):
        left = self.parse_additive()
        if self.at_op("=", "<>", "<", "<=", ">", ">="):
            op = self.advance().value
            return A.Binary(op, left, self.parse_additive())
        if self.accept_kw("IS"):
            op = "IS NOT" if self.accept_kw("NOT") else "IS"
            if not self.accept_kw("NULL"):
                self.error("expected NULL after IS")
            return A.Binary(op, left, A.NullLiteral())
        negate = False
        if self.at_kw("NOT") and self.peek().kind == "keyword" and self.peek().value in ("LIKE", "IN"):
            self.advance()
            negate = True
        if self.accept_kw("LIKE"):
            node = A.Binary("LIKE", left, self.parse_additive())
        elif self.accept_kw("IN"):
            node = A.Binary("IN", left, self.parse_in_rhs())
        else:
            return left
        return A.Unary("NOT", node) if negate else node

    def parse_in_rhs(self):
        self.expect_op("(")
        if self.at_kw("SELECT"):
            sub = self.parse_query()
            self.expect_op(")")
            return A.Subquery(sub)
        items = [self.parse_expr()]
        while self.accept_op(","):
            items.append(self.parse_expr())
        self.expect_op(")")
        return A.ExprList(tuple(items))

    def parse_additive(self):
        left = self.parse_multiplicative()
        while self.at_op("+", "-"):
            op = self.advance().value
            left = A.Binary(op, left, self.parse_multiplicative())
        return left

    def parse_multiplicative(self):
        left = self.parse_unary()
        while self.at_op("*", "/"):
            op = self.advance().value
            left = A.Binary(op, left, self.parse_unary())
        return left

    def parse_unary(self):
        if self.accept_op("-"):
            return A.Unary("-", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return A.NumberLiteral(tok.value)
        if tok.kind == "string":
            self.advance()
            return A.StringLiteral(tok.value)
        if tok.kind == "keyword":
            if tok.value in ("TRUE", "FALSE"):
                self.advance()
                return A.BoolLiteral(tok.value == "TRUE")
            if tok.value == "NULL":
                self.advance()
                return A.NullLiteral()
            self.error("expected expression")
        if self.at_op("("):
            self.advance()
            if self.at_kw("SELECT"):
                sub = self.parse_query()
                self.expect_op(")")
                return A.Subquery(sub)
            inner = self.parse_expr()
            self.expect_op(")")
            return A.Paren(inner)
        if tok.kind == "ident":
            self.advance()
            if self.at_op("("):
                return self.parse_call(tok.value)
            if self.at_op(".") and self.peek().kind == "ident":
                self.advance()
                column = self.advance().value
                return A.ColumnRef(column, qualifier=tok.value)
            return A.ColumnRef(tok.value)
        self.error("expected expression")

    def parse_call(self, name):
        self.expect_op("(")
        if self.accept_op("*"):
            self.expect_op(")")
            return A.FunctionCall(name, (), star_arg=True)
        args = []
        if not self.at_op(")"):
            args.append(self.parse_expr())
            while self.accept_op(","):
                args.append(self.parse_expr())
        self.expect_op(")")
        return A.FunctionCall(name, tuple(args))


def parse(sql: str) -> A.Query:
    """Parse one SELECT statement (optionally ``;``-terminated) into a :class:`Query`."""
    return Parser(sql).parse_statement()


def parse_expression(text: str):
    p = Parser(text)
    expr = p.parse_expr()
    if p.tok.kind != "eof":
        p.error("unexpected token after expression")
    return expr
