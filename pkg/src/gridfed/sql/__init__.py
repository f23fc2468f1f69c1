"""SQL front end: tokenizer, parser, canonical printer, identifier report."""
from .ast import *  # noqa: F401,F403
from .identifiers import ColumnOccurrence, IdentifierReport, TableOccurrence, collect_identifiers
from .parser import parse, parse_expression
from .printer import print_expr, print_query, quote_ident, to_sql

__all__ = [
    "parse", "parse_expression", "print_query", "print_expr", "to_sql", "quote_ident",
    "collect_identifiers", "IdentifierReport", "TableOccurrence", "ColumnOccurrence",
]
