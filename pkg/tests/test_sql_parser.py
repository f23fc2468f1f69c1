import random

import pytest
from hypothesis import given, settings, strategies as st

import centergen
import enginegen
from gridfed.errors import ParseError
from gridfed.sql import ast as A
from gridfed.sql import collect_identifiers, parse, parse_expression, print_expr, print_query
from gridfed.sql.lexer import WRITE_HEADS

JOIN_SQL = ("SELECT s.studentname, d.departmentName FROM student s JOIN Department d "
            "ON s.departmentid = d.departmentiden WHERE s.CGPA > 3.5 ORDER BY s.studentname")


def test_simple_select_ast():
    q = parse("SELECT studentname FROM student")
    assert q.select_items == (A.SelectExpr(A.ColumnRef("studentname"), None),)
    assert q.from_ == A.NamedTable("student", None)
    assert q.joins == () and q.where is None and q.limit is None and not q.distinct


def test_join_query_ast():
    q = parse(JOIN_SQL)
    assert q == A.Query(
        select_items=(
            A.SelectExpr(A.ColumnRef("studentname", "s"), None),
            A.SelectExpr(A.ColumnRef("departmentName", "d"), None),
        ),
        from_=A.NamedTable("student", "s"),
        joins=(A.Join("inner", A.NamedTable("Department", "d"),
                      A.Binary("=", A.ColumnRef("departmentid", "s"), A.ColumnRef("departmentiden", "d"))),),
        where=A.Binary(">", A.ColumnRef("CGPA", "s"), A.NumberLiteral("3.5")),
        group_by=(),
        having=None,
        order_by=(A.OrderItem(A.ColumnRef("studentname", "s"), False),),
        limit=None,
        distinct=False,
    )
    assert print_query(q) == JOIN_SQL


def test_canonical_print():
    assert print_query(parse("select  x from t")) == "SELECT x FROM t"
    assert print_query(parse("select distinct a as b from t as u left outer join v on u.a=v.a limit 3")) == \
        "SELECT DISTINCT a AS b FROM t u LEFT JOIN v ON u.a = v.a LIMIT 3"


def test_quote_doubling():
    q = parse("SELECT x FROM t WHERE name = 'O''Brien'")
    assert q.where.right == A.StringLiteral("O'Brien")
    assert print_query(q) == "SELECT x FROM t WHERE name = 'O''Brien'"


def test_print_is_deterministic():
    q = parse(JOIN_SQL)
    assert print_query(q) == print_query(parse(JOIN_SQL)) == print_query(q)


@pytest.mark.parametrize("sql, pos", [("DELETE FROM student", 0), ("  insert into t values (1)", 2)])
def test_write_statements_rejected(sql, pos):
    with pytest.raises(ParseError) as exc:
        parse(sql)
    assert exc.value.position == pos
    assert "SELECT" in str(exc.value)


@pytest.mark.parametrize("head", sorted(WRITE_HEADS))
def test_every_write_head_rejected(head):
    with pytest.raises(ParseError):
        parse(f"{head} something")
    with pytest.raises(ParseError):
        parse(f"{head.lower()} x")


@pytest.mark.parametrize("sql", [
    "", "SELECT", "SELECT FROM t", "SELECT a FROM", "SELECT a FROM t WHERE", "SELECT a FROM t JOIN u",
    "SELECT a FROM t LIMIT -1", "SELECT a FROM t ORDER BY 0", "SELECT a FROM (SELECT b FROM u)",
    "SELECT a FROM t WHERE a = 'open", "SELECT a FROM t t2 t3", "SELECT a FROM t WHERE a IN 3",
    "SELECT a FROM t HAVING a > 1", "SELECT a b c FROM t", "SELECT a FROM t; SELECT b FROM t",
    "SELECT a FROM t WHERE a < b < c", "SELECT a FROM t WHERE 1e",
])
def test_malformed_rejected(sql):
    with pytest.raises(ParseError):
        parse(sql)


def test_having_allowed_with_aggregate_or_group():
    parse("SELECT COUNT(*) FROM t HAVING COUNT(*) > 1")
    parse("SELECT a FROM t GROUP BY a HAVING a > 1")


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse("SELECT a FROM t WHERE")
    assert exc.value.position == len("SELECT a FROM t WHERE")


def test_precedence():
    e = parse_expression("a OR b AND NOT c = 1 + 2 * -3")
    assert print_expr(e) == "a OR b AND NOT c = 1 + 2 * -3"
    assert e.op == "OR"
    assert e.right.op == "AND"
    assert e.right.right == A.Unary("NOT", A.Binary("=", A.ColumnRef("c"), A.Binary(
        "+", A.NumberLiteral("1"), A.Binary("*", A.NumberLiteral("2"), A.Unary("-", A.NumberLiteral("3"))))))


def test_paren_kept_and_required_grouping():
    assert print_expr(parse_expression("(a + b) * c")) == "(a + b) * c"
    assert parse_expression("(a)") == A.Paren(A.ColumnRef("a"))
    assert print_expr(A.Binary("*", A.Binary("+", A.ColumnRef("a"), A.ColumnRef("b")), A.ColumnRef("c"))) \
        == "(a + b) * c"
    assert print_expr(A.Binary("-", A.ColumnRef("a"), A.Binary("-", A.ColumnRef("b"), A.ColumnRef("c")))) \
        == "a - (b - c)"


def test_number_text_verbatim():
    q = parse("SELECT 3.50, 007, 1e3, .5 FROM t")
    assert [i.expr.text for i in q.select_items] == ["3.50", "007", "1e3", ".5"]
    assert print_query(q) == "SELECT 3.50, 007, 1e3, .5 FROM t"


def test_misc_constructs():
    sql = ("SELECT COUNT(*), COUNT(DISTINCT_x), t.* FROM t CROSS JOIN u RIGHT JOIN v ON v.a = t.a "
           "WHERE a NOT LIKE 'x%' AND b NOT IN (1, 2) AND c IN (SELECT c FROM w) AND d IS NOT NULL "
           "AND e = (SELECT MAX(e) FROM w) AND f = TRUE AND g IS NULL GROUP BY a, b HAVING COUNT(*) > 1 "
           "ORDER BY 1 DESC, a ASC LIMIT 10")
    q = parse(sql)
    assert q.select_items[0].expr == A.FunctionCall("COUNT", (), True)
    assert q.select_items[2] == A.QualifiedStar("t")
    assert [j.kind for j in q.joins] == ["cross", "right"]
    assert q.order_by[0].key == 1 and q.order_by[0].descending
    assert parse(print_query(q)) == q


def test_comments_and_comma_join():
    q = parse("SELECT a -- the column\nFROM t, u")
    assert q.joins == (A.Join("cross", A.NamedTable("u", None), None),)


def test_not_equal_normalised():
    assert parse_expression("a != 1") == parse_expression("a <> 1")


def test_quoted_identifier_round_trip():
    q = parse('SELECT "select", "UPPER(x)" FROM "my table"')
    assert q.select_items[0].expr == A.ColumnRef("select")
    assert q.from_.name == "my table"
    assert parse(print_query(q)) == q


def test_double_minus_printed_safely():
    e = A.Unary("-", A.Unary("-", A.ColumnRef("x")))
    assert parse_expression(print_expr(e)) == e


# -- identifiers -----------------------------------------------------------------

def test_identifiers_join_query():
    rep = collect_identifiers(parse(JOIN_SQL))
    assert [(t.name, t.alias, t.clause) for t in rep.table_refs] == [
        ("student", "s", "from"), ("Department", "d", "join")]
    assert [(c.qualifier, c.name, c.clause) for c in rep.column_refs] == [
        ("s", "studentname", "select"), ("d", "departmentName", "select"),
        ("s", "departmentid", "join"), ("d", "departmentiden", "join"),
        ("s", "CGPA", "where"), ("s", "studentname", "order_by"),
    ]


def test_identifiers_literal_select():
    rep = collect_identifiers(parse("SELECT 1 FROM student"))
    assert [(t.name, t.alias) for t in rep.table_refs] == [("student", None)]
    assert rep.column_refs == []


def test_identifiers_subquery_depth():
    rep = collect_identifiers(parse(
        "SELECT studentname FROM student WHERE departmentid IN "
        "(SELECT departmentiden FROM Department WHERE TotalCredit > 150)"))
    assert [(t.name, t.clause, t.depth) for t in rep.table_refs] == [
        ("student", "from", 0), ("Department", "from", 1)]
    assert [(c.name, c.clause, c.depth) for c in rep.column_refs] == [
        ("studentname", "select", 0), ("departmentid", "where", 0),
        ("departmentiden", "select", 1), ("TotalCredit", "where", 1),
    ]


def _naive_walk(node, tables, columns):
    """Independent exhaustive walk over dataclass fields."""
    import dataclasses
    if isinstance(node, A.ColumnRef):
        columns.append((node.qualifier, node.column))
    if isinstance(node, A.NamedTable):
        tables.append((node.name, node.alias))
    if dataclasses.is_dataclass(node):
        for f in dataclasses.fields(node):
            _naive_walk(getattr(node, f.name), tables, columns)
    elif isinstance(node, tuple):
        for x in node:
            _naive_walk(x, tables, columns)


# -- properties ------------------------------------------------------------------

def _random_sql(seed):
    rng = random.Random(seed)
    if seed % 2:
        return centergen.random_query(rng)
    enginegen.random_database(rng)
    return enginegen.case_sql(enginegen.random_case(rng))


@settings(max_examples=400, deadline=None)
@given(st.integers(0, 10**9))
def test_fixpoint(seed):
    sql = _random_sql(seed)
    q = parse(sql)
    printed = print_query(q)
    assert parse(printed) == q
    assert print_query(parse(printed)) == printed


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9))
def test_identifier_report_matches_naive_walk(seed):
    q = parse(_random_sql(seed))
    tables, columns = [], []
    _naive_walk(q, tables, columns)
    rep = collect_identifiers(q)
    assert sorted((t.name, t.alias or "") for t in rep.table_refs) == sorted((n, a or "") for n, a in tables)
    assert sorted((c.qualifier or "", c.name) for c in rep.column_refs) == \
        sorted((q_ or "", n) for q_, n in columns)


safe_text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=20)


@settings(max_examples=300)
@given(safe_text, st.from_regex(r"\A(0|[1-9][0-9]{0,6})(\.[0-9]{1,4})?\Z"))
def test_literals_preserved(text, number):
    q = parse(f"SELECT {number} FROM t WHERE c = '{text.replace(chr(39), chr(39) * 2)}'")
    assert q.select_items[0].expr == A.NumberLiteral(number)
    assert q.where.right == A.StringLiteral(text)
    assert parse(print_query(q)) == q


@given(st.sampled_from(sorted(WRITE_HEADS)), st.text(max_size=30), st.sampled_from(["", " ", "\n  "]))
def test_rejection_completeness(head, tail, lead):
    with pytest.raises(ParseError):
        parse(lead + head + " " + tail)
