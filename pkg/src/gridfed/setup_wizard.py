"""Member installation wizard.

Walks an operator through choosing a backend, mapping every center table and
column to a local counterpart, writing GridMapping.xml and registering with
the center. Prompts come from a :class:`Prompter`, which either reads a
terminal or replays an answers file (one answer per line; an empty line
accepts the default, ``-`` skips an optional item).
"""
from __future__ import annotations

import logging
import socket
import sys
from dataclasses import dataclass
from typing import Callable, Optional

from .backends import Backend, open_backend
from .errors import BackendError, ConfigError, GridError
from .member_agent import detect_address, register_with_center
from .schema_model import (
    BACKEND_KINDS,
    ColumnMap,
    GridMember,
    MemberMapping,
    TableMap,
    VirtualSchema,
    save_mapping,
    validate_mapping,
    write_atomic,
)

log = logging.getLogger("gridfed.setup")

DEFAULT_PORT = 2222
SKIP = "-"


class WizardAborted(ConfigError):
    """The answer stream ended before the wizard finished."""


class Prompter:
    """Question/answer channel; ``answers`` replays scripted input when given."""

    def __init__(self, answers=None, stdin=None, stdout=None):
        self._answers = iter(answers) if answers is not None else None
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def say(self, text: str = "") -> None:
        self.stdout.write(text + "\n")
        self.stdout.flush()

    def _read(self, question: str) -> str:
        self.stdout.write(question)
        self.stdout.flush()
        if self._answers is not None:
            try:
                answer = next(self._answers)
            except StopIteration:
                raise WizardAborted(f"no answer left for: {question.strip()}") from None
            self.stdout.write(answer + "\n")
            return answer.strip()
        line = self.stdin.readline()
        if not line:
            raise WizardAborted(f"input ended at: {question.strip()}")
        return line.strip()

    def ask(self, question: str, default: Optional[str] = None, check: Optional[Callable] = None):
        """Ask until ``check`` accepts; ``check`` returns the value or raises ValueError."""
        suffix = f" [{default}]" if default not in (None, "") else ""
        while True:
            raw = self._read(f"{question}{suffix}: ")
            if raw == "" and default is not None:
                raw = default
            try:
                return check(raw) if check else raw
            except ValueError as exc:
                self.say(f"  {exc}")


def answers_from_file(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\r\n") for line in fh]


@dataclass(frozen=True)
class WizardResult:
    mapping: MemberMapping
    member: GridMember
    mapping_path: str
    registered: bool
    serve: bool
    ack_status: Optional[str] = None


def _lookup(names, wanted: str) -> Optional[str]:
    key = wanted.casefold()
    for n in names:
        if n.casefold() == key:
            return n
    return None


def _choose_backend(p: Prompter, base_dir=None):
    def kind_check(v):
        if v not in BACKEND_KINDS:
            raise ValueError(f"choose one of {', '.join(BACKEND_KINDS)}")
        return v

    kind = p.ask("Backend kind (" + "/".join(BACKEND_KINDS) + ")", "embedded", kind_check)
    label = "Fixture script path (or :memory:)" if kind == "embedded" else "Connection string"

    def open_check(v):
        if not v:
            raise ValueError("a value is required")
        try:
            return v, open_backend(kind, v, base_dir=base_dir)
        except BackendError as exc:
            raise ValueError(str(exc)) from None

    conn, backend = p.ask(label, None, open_check)
    return kind, conn, backend


def _map_tables(p: Prompter, schema: VirtualSchema, catalog: Optional[dict]) -> tuple:
    """Prompt for every center table and column; ``catalog`` is None when the backend cannot introspect."""
    if catalog is not None:
        p.say("Local tables:")
        for t, cols in catalog.items():
            p.say(f"  {t}: " + ", ".join(f"{c} {d}" for c, d in cols))
    tables = []
    for ct in schema.tables:
        local_names = list(catalog) if catalog is not None else []
        default = _lookup(local_names, ct.name) or ""

        def table_check(v):
            if v == SKIP or v == "":
                return None
            if catalog is None:
                return v
            found = _lookup(local_names, v)
            if found is None:
                raise ValueError(f"no local table {v!r}; known: {', '.join(local_names) or 'none'}")
            return found

        desc = f" ({ct.description})" if ct.description else ""
        grid_table = p.ask(f"Local table for center table {ct.name}{desc}, '-' to skip", default, table_check)
        if grid_table is None:
            p.say(f"  {ct.name} left unmapped")
            continue

        local_cols = [c for c, _ in catalog[grid_table]] if catalog is not None else []
        columns = []
        for cc in ct.columns:
            col_default = _lookup(local_cols, cc.name) or ""

            def column_check(v):
                if v == SKIP or v == "":
                    return None
                if catalog is None:
                    return v
                found = _lookup(local_cols, v)
                if found is None:
                    raise ValueError(f"{grid_table} has no column {v!r}; known: {', '.join(local_cols)}")
                return found

            cdesc = ", ".join(x for x in (cc.description, cc.datatype) if x)
            grid_col = p.ask(f"  column {cc.name} ({cdesc}) maps to, '-' to skip", col_default, column_check)
            if grid_col is not None:
                columns.append(ColumnMap(cc.name, grid_col))
        if columns:
            tables.append(TableMap(ct.name, grid_table, tuple(columns)))
        else:
            p.say(f"  no columns mapped; {ct.name} left unmapped")
    return tuple(tables)


def _port_check(v):
    if not v.isdigit() or not 1 <= int(v) <= 65535:
        raise ValueError("port must be an integer between 1 and 65535")
    return int(v)


def _yes_no(v):
    low = v.lower()
    if low in ("y", "yes"):
        return True
    if low in ("n", "no"):
        return False
    raise ValueError("answer y or n")


def run_wizard(schema: VirtualSchema, center: Optional[tuple], prompter: Prompter,
               output_path: str = "GridMapping.xml", base_dir=None,
               register: Callable = register_with_center) -> WizardResult:
    """Run the interactive setup and return what was written and whether registration worked."""
    p = prompter
    p.say("Grid member setup")
    kind, conn, backend = _choose_backend(p, base_dir)
    try:
        catalog = backend.describe()
    finally:
        backend.close()
    if catalog is None:
        p.say("This backend cannot list its tables; names will be accepted as typed.")

    tables = _map_tables(p, schema, catalog)

    default_name = socket.gethostname() or "member"
    name = p.ask("Member name", default_name, lambda v: v if v else _raise("a name is required"))
    address = p.ask("Network address of this computer",
                    detect_address(center) if center else "127.0.0.1",
                    lambda v: v if v else _raise("an address is required"))
    port = p.ask("Port for the data grid service", str(DEFAULT_PORT), _port_check)

    mapping = MemberMapping(conn, tables, port, kind)
    issues = validate_mapping(mapping, schema)
    if issues:  # prompts only offer center names, so this means the schema changed underneath us
        raise ConfigError("mapping does not match the center schema: " + "; ".join(map(str, issues)))
    write_atomic(output_path, save_mapping(mapping))
    p.say(f"Wrote {output_path}")

    member = GridMember(name, address, port)
    registered, ack_status = False, None
    if center is not None:
        try:
            ack = register(center, member)
            registered, ack_status = True, ack.status
            p.say(f"Registered with center {center[0]}:{center[1]}: {ack.status}, "
                  f"{ack.member_count} member(s) in the grid")
        except (GridError, OSError) as exc:
            p.say(f"Registration failed: {exc}")
            p.say(f"Retry later with: gridctl member register --center {center[0]}:{center[1]} "
                  f"--name {name} --address {address} --port {port}")

    serve = p.ask("Start the data grid service now? (y/n)", "y", _yes_no)
    return WizardResult(mapping, member, output_path, registered, serve, ack_status)


def _raise(message):
    raise ValueError(message)
