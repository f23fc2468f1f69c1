"""Grid consumer: fan a center-schema query out to every member and merge the answers.

Results are merged as a bag union: rows from every member that answered are
concatenated in member order. Aggregates are therefore per member; a
``COUNT(*)`` over two members yields two rows, one per member, and is never
re-aggregated here.
"""
from __future__ import annotations

import json
import os
import socket
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from . import wire_protocol as wire
from .backends.engine import ResultColumn, ResultSet
from .errors import ConnectionFailed, GridError, NoSuccessfulMembers, ProtocolError
from .schema_model import GridMember, load_registry_file

DEFAULT_TIMEOUT_MS = 10_000
PROVENANCE_COLUMN = "__member"
STATUSES = ("ok", "error", "timeout", "unreachable")


def default_timeout_ms() -> int:
    raw = os.environ.get("GRID_TIMEOUT_MS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value > 0:
            return value
    return DEFAULT_TIMEOUT_MS


@dataclass(frozen=True)
class MemberOutcome:
    member: GridMember
    status: str
    result: Optional[ResultSet] = None
    error_code: Optional[str] = None
    message: Optional[str] = None
    elapsed_ms: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.result is not None) != (self.status == "ok"):
            raise ValueError("result must be present exactly when status is ok")

    @property
    def row_count(self) -> int:
        return len(self.result.rows) if self.result is not None else 0


@dataclass(frozen=True)
class FederatedResult:
    columns: tuple
    rows: tuple
    outcomes: tuple
    warnings: tuple = ()

    @property
    def column_names(self) -> list:
        return [c.name for c in self.columns]

    def to_json_obj(self) -> dict:
        return {
            "columns": [{"name": c.name, "datatype": c.datatype} for c in self.columns],
            "rows": [list(r) for r in self.rows],
            "outcomes": [outcome_json(o) for o in self.outcomes],
            "warnings": list(self.warnings),
        }


def outcome_json(o: MemberOutcome) -> dict:
    return {
        "member": o.member.name,
        "address": o.member.address,
        "port": o.member.port,
        "status": o.status,
        "rows": o.row_count,
        "error_code": o.error_code,
        "message": o.message,
        "elapsed_ms": round(o.elapsed_ms, 1),
    }


# ---------------------------------------------------------------------------
# discovery
# ---------------------------------------------------------------------------

def discover_members(source, timeout: float = 5.0) -> list:
    """Members from a GridList.xml path or from a live center ``(host, port)``."""
    if isinstance(source, tuple):
        try:
            reply = wire.request(source, wire.ListMembers(), timeout)
        except OSError as exc:
            raise ConnectionFailed(f"center {source[0]}:{source[1]} did not answer: {exc}") from None
        except ProtocolError as exc:
            raise ConnectionFailed(f"center {source[0]}:{source[1]}: {exc}") from None
        if not isinstance(reply, wire.MemberList):
            raise ProtocolError(f"expected MemberList, got {type(reply).__name__}")
        return list(reply.members)
    return list(load_registry_file(source).members)


# ---------------------------------------------------------------------------
# fan-out
# ---------------------------------------------------------------------------

def _to_result_set(msg: wire.ResultOk) -> ResultSet:
    return ResultSet(tuple(ResultColumn(c.name, c.datatype) for c in msg.columns), tuple(msg.rows))


def query_member(member: GridMember, sql: str, timeout_ms: int, request_id: Optional[str] = None) -> MemberOutcome:
    """Send one Query to one member and classify what comes back."""
    rid = request_id or uuid.uuid4().hex
    start = time.monotonic()
    deadline = start + timeout_ms / 1000.0

    def done(status, **kw):
        return MemberOutcome(member, status, elapsed_ms=(time.monotonic() - start) * 1000.0, **kw)

    try:
        sock = socket.create_connection(member.endpoint, timeout=timeout_ms / 1000.0)
    except socket.timeout:
        return done("timeout", message="connect timed out")
    except OSError as exc:
        return done("unreachable", message=str(exc))

    try:
        with sock:
            sock.sendall(wire.encode(wire.Query(rid, sql)))
            decoder = wire.FrameDecoder()
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return done("timeout", message=f"no answer within {timeout_ms} ms")
                sock.settimeout(remaining)
                chunk = sock.recv(1 << 16)
                if not chunk:
                    return done("error", error_code="PROTOCOL_ERROR",
                                message="member closed the connection without answering")
                messages = decoder.feed(chunk)
                if messages:
                    reply = messages[0]
                    break
    except socket.timeout:
        return done("timeout", message=f"no answer within {timeout_ms} ms")
    except ProtocolError as exc:
        return done("error", error_code="PROTOCOL_ERROR", message=str(exc))
    except OSError as exc:
        return done("error", error_code="CONNECTION_ERROR", message=str(exc))

    if getattr(reply, "request_id", None) != rid:
        return done("error", error_code="PROTOCOL_ERROR", message="reply for a different request")
    if isinstance(reply, wire.ResultOk):
        return done("ok", result=_to_result_set(reply))
    if isinstance(reply, wire.ResultErr):
        return done("error", error_code=reply.code, message=reply.message)
    return done("error", error_code="PROTOCOL_ERROR", message=f"unexpected {type(reply).__name__}")


def fan_out(sql: str, members, timeout_ms: Optional[int] = None) -> list:
    """Query every member concurrently; one outcome per member, in member order."""
    members = list(members)
    if not members:
        return []
    timeout_ms = default_timeout_ms() if timeout_ms is None else timeout_ms
    with ThreadPoolExecutor(max_workers=len(members), thread_name_prefix="fanout") as pool:
        futures = [pool.submit(query_member, m, sql, timeout_ms, uuid.uuid4().hex) for m in members]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# unification
# ---------------------------------------------------------------------------

def _widen(a: str, b: str) -> str:
    if a == b:
        return a
    if {a, b} == {"int", "float"}:
        return "float"
    return "string"


def _as_text(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _conform(v, datatype: str):
    if v is None:
        return None
    if datatype == "string":
        return _as_text(v)
    if datatype == "float" and isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v


def unify(outcomes, with_provenance: bool = False) -> FederatedResult:
    """Merge ok outcomes into one table; demote members whose columns disagree."""
    outcomes = list(outcomes)
    reference = None
    contributors = []
    for i, o in enumerate(outcomes):
        if o.status != "ok":
            continue
        names = [c.name.casefold() for c in o.result.columns]
        if reference is None:
            reference = o.result.columns
            contributors.append(i)
        elif names != [c.name.casefold() for c in reference]:
            outcomes[i] = replace(
                o, status="error", result=None, error_code="UNIFICATION_MISMATCH",
                message=f"columns {[c.name for c in o.result.columns]} differ from "
                        f"{[c.name for c in reference]}",
            )
        else:
            contributors.append(i)

    if reference is None:
        raise NoSuccessfulMembers("no member returned a result")

    types = [c.datatype for c in reference]
    for i in contributors[1:]:
        types = [_widen(t, c.datatype) for t, c in zip(types, outcomes[i].result.columns)]

    warnings = []
    for k, t in enumerate(types):
        if t == "string" and any(outcomes[i].result.columns[k].datatype != "string" for i in contributors):
            warnings.append(f"column {reference[k].name!r} has mixed types across members; values shown as text")

    columns = [ResultColumn(c.name, t) for c, t in zip(reference, types)]
    rows = []
    for i in contributors:
        o = outcomes[i]
        for r in o.result.rows:
            row = tuple(_conform(v, t) for v, t in zip(r, types))
            rows.append((o.member.name,) + row if with_provenance else row)
    if with_provenance:
        columns.insert(0, ResultColumn(PROVENANCE_COLUMN, "string"))
    return FederatedResult(tuple(columns), tuple(rows), tuple(outcomes), tuple(warnings))


def federated_query(sql: str, members, timeout_ms: Optional[int] = None, with_provenance: bool = False):
    """``fan_out`` then ``unify``; returns ``(FederatedResult or None, outcomes)``."""
    outcomes = fan_out(sql, members, timeout_ms)
    try:
        return unify(outcomes, with_provenance), outcomes
    except NoSuccessfulMembers:
        return None, outcomes


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def render_table(names, rows) -> str:
    cells = [[_cell(v) for v in r] for r in rows]
    widths = [len(n) for n in names]
    for r in cells:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(values):
        return "| " + " | ".join(v.ljust(w) for v, w in zip(values, widths)) + " |"

    out = [sep, line(names), sep]
    out.extend(line(r) for r in cells)
    out.append(sep)
    n = len(rows)
    out.append(f"({n} row{'s' if n != 1 else ''})")
    return "\n".join(out)


def render_outcomes(outcomes) -> str:
    lines = []
    for o in outcomes:
        text = f"  {o.member.name:<16} {o.status:<11} rows={o.row_count:<5} {o.elapsed_ms:8.1f} ms"
        if o.status != "ok":
            detail = " ".join(x for x in (o.error_code, o.message) if x)
            if detail:
                text += f"  {detail}"
        lines.append(text)
    return "members:\n" + "\n".join(lines) if lines else "members: none"


def render(result: Optional[FederatedResult], outcomes) -> str:
    parts = []
    if result is not None:
        parts.append(render_table(result.column_names, result.rows))
        parts.extend(f"warning: {w}" for w in result.warnings)
    else:
        parts.append("no member returned a result")
    parts.append(render_outcomes(result.outcomes if result is not None else outcomes))
    return "\n".join(parts)


def render_json(result: Optional[FederatedResult], outcomes) -> str:
    if result is None:
        obj = {"columns": [], "rows": [], "outcomes": [outcome_json(o) for o in outcomes],
               "warnings": [], "error": "no member returned a result"}
    else:
        obj = result.to_json_obj()
    return json.dumps(obj, indent=2, ensure_ascii=False)


# ---------------------------------------------------------------------------
# REPL
# ---------------------------------------------------------------------------

@dataclass
class ReplConfig:
    source: object  # GridList.xml path or (host, port) of the center
    timeout_ms: int = field(default_factory=default_timeout_ms)
    provenance: bool = False


def repl(config: ReplConfig, stdin=None, stdout=None, prompt: str = "grid> ") -> int:
    """Read one SQL statement per line, run it across the grid and print the merged table."""
    import sys

    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def say(text=""):
        stdout.write(text + "\n")
        stdout.flush()

    while True:
        stdout.write(prompt)
        stdout.flush()
        line = stdin.readline()
        if not line:
            say()
            return 0
        statement = line.strip().rstrip(";").strip()
        if not statement:
            continue
        if statement.startswith("\\"):
            if _meta(statement, config, say):
                return 0
            continue
        try:
            members = discover_members(config.source)
        except (GridError, OSError) as exc:
            say(f"error: cannot list members: {exc}")
            continue
        if not members:
            say("error: no grid members registered")
            continue
        result, outcomes = federated_query(statement, members, config.timeout_ms, config.provenance)
        say(render(result, outcomes))


def _meta(line: str, config: ReplConfig, say) -> bool:
    """Run a backslash command; True means quit."""
    parts = line.split()
    cmd = parts[0]
    if cmd in ("\\quit", "\\q"):
        return True
    if cmd == "\\members":
        try:
            members = discover_members(config.source)
        except (GridError, OSError) as exc:
            say(f"error: {exc}")
            return False
        if not members:
            say("no grid members registered")
        for m in members:
            say(f"  {m.name:<16} {m.address}:{m.port}")
        return False
    if cmd == "\\timeout":
        if len(parts) == 2 and parts[1].isdigit() and int(parts[1]) > 0:
            config.timeout_ms = int(parts[1])
            say(f"timeout set to {config.timeout_ms} ms")
        else:
            say(f"timeout is {config.timeout_ms} ms (usage: \\timeout MILLISECONDS)")
        return False
    if cmd == "\\provenance":
        config.provenance = not config.provenance
        say(f"provenance column {'on' if config.provenance else 'off'}")
        return False
    say(f"unknown command {cmd}; try \\members, \\timeout N, \\provenance or \\quit")
    return False
