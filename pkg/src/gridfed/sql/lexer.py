from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = frozenset(
    """
    SELECT DISTINCT FROM WHERE GROUP BY HAVING ORDER LIMIT AS JOIN INNER LEFT RIGHT
    OUTER CROSS ON AND OR NOT LIKE IN IS NULL TRUE FALSE ASC DESC
    INSERT UPDATE DELETE CREATE DROP ALTER TRUNCATE MERGE REPLACE GRANT REVOKE
    UNION INTERSECT EXCEPT WITH INTO VALUES SET TABLE
    """.split()
)

# statement heads we recognise only to reject with a clear message
WRITE_HEADS = frozenset(
    "INSERT UPDATE DELETE CREATE DROP ALTER TRUNCATE MERGE REPLACE GRANT REVOKE".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<qident>"(?:[^"]|"")+")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<op><>|!=|<=|>=|[=<>+\-*/(),.;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | number | string | op | eof
    value: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos] in "'\"":
                raise ParseError(pos, "unterminated quoted token")
            raise ParseError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        raw = m.group()
        if kind == "ws":
            pass
        elif kind == "string":
            tokens.append(Token("string", raw[1:-1].replace("''", "'"), pos))
        elif kind == "qident":
            tokens.append(Token("ident", raw[1:-1].replace('""', '"'), pos))
        elif kind == "ident":
            upper = raw.upper()
            if upper in KEYWORDS:
                tokens.append(Token("keyword", upper, pos))
            else:
                tokens.append(Token("ident", raw, pos))
        elif kind == "number":
            tokens.append(Token("number", raw, pos))
        else:
            tokens.append(Token("op", "<>" if raw == "!=" else raw, pos))
        pos = m.end()
    tokens.append(Token("eof", "", n))
    return tokens
