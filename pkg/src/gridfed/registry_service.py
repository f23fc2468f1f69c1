"""The center's register server.

On start it loads GridList.xml and logs the known members, then accepts
``Register`` and ``ListMembers`` requests until stopped. Every accepted
registration is written to disk before it is acknowledged.
"""
from __future__ import annotations

import logging
import os
import socket
import socketserver
import threading
from dataclasses import dataclass

from . import wire_protocol as wire
from .errors import GridError
from .schema_model import (
    GridMember,
    GridRegistry,
    load_registry_file,
    save_registry,
    write_atomic,
)

log = logging.getLogger("gridfed.center")

READ_TIMEOUT = 10.0


def apply_registration(registry: GridRegistry, member: GridMember):
    """Return ``(new_registry, status)``; status is ``"added"`` or ``"updated"``."""
    members = list(registry.members)
    for i, m in enumerate(members):
        if m.name == member.name:
            members[i] = member
            return GridRegistry(tuple(members)), "updated"
    members.append(member)
    return GridRegistry(tuple(members)), "added"


def display_members(registry: GridRegistry, logger=log) -> None:
    logger.info("grid members: %d", len(registry.members))
    for m in registry.members:
        logger.info("member %s %s:%d", m.name, m.address, m.port)


@dataclass
class RegistryConfig:
    listen: tuple = ("0.0.0.0", 0)
    registry_path: str = "GridList.xml"


class RegistryState:
    """In-memory registry plus its file; mutations are serialised by a lock."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self.lock = threading.Lock()
        if os.path.exists(self.path):
            self.registry = load_registry_file(self.path)
        else:
            self.registry = GridRegistry()

    def snapshot(self) -> GridRegistry:
        return self.registry

    def register(self, member: GridMember) -> tuple:
        with self.lock:
            updated, status = apply_registration(self.registry, member)
            write_atomic(self.path, save_registry(updated))
            self.registry = updated
        return updated, status


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: RegistryServer = self.server
        sock: socket.socket = self.request
        sock.settimeout(READ_TIMEOUT)
        try:
            msg = wire.recv_message(sock)
        except (GridError, OSError) as exc:
            log.warning("dropping connection from %s: %s", self.client_address[0], exc)
            return

        if isinstance(msg, wire.Register):
            member = GridMember(msg.name, msg.address, msg.port)
            try:
                registry, status = server.state.register(member)
            except OSError as exc:
                log.error("could not persist registration of %s: %s", member.name, exc)
                return
            log.info("registration %s: %s %s:%d", status, member.name, member.address, member.port)
            display_members(registry)
            reply = wire.RegisterAck(status, len(registry.members))
        elif isinstance(msg, wire.ListMembers):
            reply = wire.MemberList(server.state.snapshot().members)
        else:
            log.warning("unexpected %s from %s", type(msg).__name__, self.client_address[0])
            return
        try:
            wire.send_message(sock, reply)
        except OSError as exc:
            log.warning("could not reply to %s: %s", self.client_address[0], exc)


class RegistryServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, config: RegistryConfig):
        self.state = RegistryState(config.registry_path)
        super().__init__(config.listen, _Handler)
        self._thread = None

    @property
    def endpoint(self) -> tuple:
        host, port = self.server_address[:2]
        return ("127.0.0.1" if host == "0.0.0.0" else host, port)

    def start(self) -> "RegistryServer":
        """Serve on a background thread (used by tests and embedding code)."""
        display_members(self.state.snapshot())
        log.info("center register service listening on %s:%d", *self.server_address[:2])
        self._thread = threading.Thread(target=self.serve_forever, args=(0.05,), name="registry", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()


def serve_registry(config: RegistryConfig) -> None:
    """Run the register service in the foreground until interrupted."""
    with RegistryServer(config) as server:
        display_members(server.state.snapshot())
        log.info("center register service listening on %s:%d", *server.server_address[:2])
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            log.info("center register service stopped")
