"""The data grid service that runs at every member site.

For each incoming ``Query`` the agent parses the center SQL, binds it to the
virtual schema, rewrites it with the member's mapping, runs it on the local
backend and replies on the same connection. Connections are served on
separate threads; nothing mutable is shared between them.
"""
from __future__ import annotations

import logging
import os
import socket
import socketserver
import threading
from dataclasses import dataclass
from typing import Optional

from . import wire_protocol as wire
from .backends import Backend, open_backend
from .errors import (
    BackendError,
    ConnectionFailed,
    GridError,
    MappingIncomplete,
    ParseError,
    ProtocolError,
    ResolveError,
)
from .query_rewriter import resolve, rewrite
from .schema_model import GridMember, MemberMapping, VirtualSchema, load_mapping_file, load_virtual_schema_file
from .sql.parser import parse
from .sql.printer import print_query

log = logging.getLogger("gridfed.member")

READ_TIMEOUT = 10.0


def handle_query(msg: wire.Query, mapping: MemberMapping, schema: VirtualSchema, backend: Backend):
    """Answer one Query; never raises."""
    rid = msg.request_id
    try:
        ast = parse(msg.sql)
        member_ast = rewrite(resolve(ast, schema), mapping)
        log.debug("request %s rewritten to: %s", rid, print_query(member_ast))
        result = backend.execute_select(member_ast)
    except (ParseError, ResolveError) as exc:
        return wire.ResultErr(rid, "PARSE_ERROR", str(exc))
    except MappingIncomplete as exc:
        return wire.ResultErr(rid, "MAPPING_INCOMPLETE", str(exc))
    except BackendError as exc:
        return wire.ResultErr(rid, "BACKEND_ERROR", str(exc))
    except Exception as exc:  # noqa: BLE001 - the agent must answer every request
        log.exception("internal error on request %s", rid)
        return wire.ResultErr(rid, "INTERNAL", f"{type(exc).__name__}: {exc}")
    for w in result.warnings:
        log.warning("request %s: %s", rid, w)
    columns = tuple(wire.ColumnSpec(c.name, c.datatype) for c in result.columns)
    return wire.ResultOk(rid, columns, tuple(tuple(r) for r in result.rows))


@dataclass
class MemberConfig:
    mapping_path: str
    schema_path: str
    fixture_path: Optional[str] = None
    host: str = "0.0.0.0"
    port: Optional[int] = None  # overrides the mapping's port when set


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: MemberServer = self.server
        sock: socket.socket = self.request
        sock.settimeout(server.read_timeout)
        try:
            msg = wire.recv_message(sock)
        except (GridError, OSError) as exc:
            log.warning("dropping connection from %s: %s", self.client_address[0], exc)
            return
        if not isinstance(msg, wire.Query):
            log.warning("unexpected %s from %s", type(msg).__name__, self.client_address[0])
            return
        log.info("query %s from %s: %s", msg.request_id, self.client_address[0], msg.sql)
        reply = handle_query(msg, server.mapping, server.schema, server.backend)
        try:
            wire.send_message(sock, reply)
        except (OSError, ProtocolError) as exc:
            log.warning("could not reply to %s: %s", self.client_address[0], exc)


class MemberServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, mapping: MemberMapping, schema: VirtualSchema, backend: Backend,
                 host: str = "0.0.0.0", port: Optional[int] = None, read_timeout: float = READ_TIMEOUT):
        self.mapping = mapping
        self.schema = schema
        self.backend = backend
        self.read_timeout = read_timeout
        self._thread = None
        super().__init__((host, mapping.port if port is None else port), _Handler)

    @property
    def endpoint(self) -> tuple:
        host, port = self.server_address[:2]
        return ("127.0.0.1" if host == "0.0.0.0" else host, port)

    def start(self) -> "MemberServer":
        self._thread = threading.Thread(target=self.serve_forever, args=(0.05,), name="member", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()


def open_member_backend(mapping: MemberMapping, mapping_path=None, fixture_path=None) -> Backend:
    if fixture_path is not None:
        return open_backend("embedded", fixture_path)
    base = os.path.dirname(os.path.abspath(mapping_path)) if mapping_path else None
    return open_backend(mapping.kind, mapping.connection_string, base_dir=base)


def build_member_server(config: MemberConfig) -> MemberServer:
    mapping = load_mapping_file(config.mapping_path)
    schema = load_virtual_schema_file(config.schema_path)
    backend = open_member_backend(mapping, config.mapping_path, config.fixture_path)
    return MemberServer(mapping, schema, backend, config.host, config.port)


def serve_member(config: MemberConfig) -> None:
    """Run a member agent in the foreground until interrupted."""
    with build_member_server(config) as server:
        log.info("data grid service listening on %s:%d", *server.server_address[:2])
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            log.info("data grid service stopped")


def register_with_center(center: tuple, member: GridMember, timeout: float = 10.0) -> wire.RegisterAck:
    """Send a Register for ``member`` to the center and return its acknowledgement."""
    try:
        reply = wire.request(center, wire.Register(member.name, member.address, member.port), timeout)
    except OSError as exc:
        raise ConnectionFailed(f"center {center[0]}:{center[1]} did not answer: {exc}") from None
    if not isinstance(reply, wire.RegisterAck):
        raise ProtocolError(f"expected RegisterAck, got {type(reply).__name__}")
    return reply


def detect_address(center: tuple) -> str:
    """Local interface address used to reach ``center`` (no packets are sent)."""
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
            s.connect(center)
            return s.getsockname()[0]
    except OSError:
        return "127.0.0.1"
