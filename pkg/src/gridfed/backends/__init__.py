"""Member-side execution backends.

A backend is opened from the ``(kind, connection_string)`` pair stored in a
member's GridMapping.xml and exposes three calls: :meth:`Backend.execute_select`,
:meth:`Backend.describe` and :meth:`Backend.close`. Only the embedded engine
ships here; ``external`` handles exist so mappings written for real DBMS
drivers still load, but they refuse to execute.
"""
from __future__ import annotations

import os
from typing import Optional

from ..errors import BackendError, FixtureNotFound, UnsupportedKind
from ..sql import ast as A
from ..sql.parser import parse
from .engine import EmbeddedDatabase, Engine, ResultColumn, ResultSet, StoredTable
from .fixture import dump_fixture, load_fixture

MEMORY = ":memory:"


class Backend:
    """Adapter contract every DBMS driver implements."""

    kind = "abstract"

    def execute_select(self, query: A.Query) -> ResultSet:
        raise NotImplementedError

    def execute_sql(self, sql: str) -> ResultSet:
        return self.execute_select(parse(sql))

    def describe(self) -> Optional[dict]:
        """``{table: [(column, datatype), ...]}`` or None when the driver cannot introspect."""
        raise NotImplementedError

    def close(self) -> None:
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class EmbeddedBackend(Backend):
    kind = "embedded"

    def __init__(self, db: EmbeddedDatabase):
        self.db = db
        self.engine = Engine(db)
        self.closed = False

    def execute_select(self, query: A.Query) -> ResultSet:
        if self.closed:
            raise BackendError("backend handle is closed")
        return self.engine.execute(query)

    def describe(self) -> dict:
        return {t.name: [(c.name, c.datatype) for c in t.columns] for t in self.db.tables}


class ExternalBackend(Backend):
    """Placeholder for a real DBMS driver; every query fails."""

    kind = "external"

    def __init__(self, connection_string: str):
        self.connection_string = connection_string
        self.closed = False

    def execute_select(self, query: A.Query) -> ResultSet:
        raise BackendError("external adapter not bundled")

    def describe(self) -> Optional[dict]:
        return None


def open_backend(kind: str, connection_string: str, base_dir=None) -> Backend:
    """Open a backend handle.

    For ``embedded`` the connection string is ``:memory:`` or a path to a
    fixture script; relative paths are tried against ``base_dir`` when they
    do not exist as given.
    """
    if kind == "embedded":
        if connection_string == MEMORY:
            return EmbeddedBackend(EmbeddedDatabase())
        path = connection_string
        if not os.path.exists(path) and base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.isfile(path):
            raise FixtureNotFound(f"fixture script not found: {connection_string}")
        with open(path, encoding="utf-8") as fh:
            return EmbeddedBackend(load_fixture(EmbeddedDatabase(), fh.read()))
    if kind == "external":
        return ExternalBackend(connection_string)
    raise UnsupportedKind(f"unsupported backend kind {kind!r}")


def execute_select(handle: Backend, query: A.Query) -> ResultSet:
    return handle.execute_select(query)


__all__ = [
    "Backend", "EmbeddedBackend", "ExternalBackend", "EmbeddedDatabase", "Engine", "MEMORY",
    "ResultColumn", "ResultSet", "StoredTable", "dump_fixture", "execute_select",
    "load_fixture", "open_backend",
]
