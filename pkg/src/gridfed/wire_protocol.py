"""Length-prefixed JSON messages exchanged between center, members and consumers.

A frame is a 4-byte big-endian unsigned payload length followed by that
many bytes of UTF-8 JSON. The JSON object carries a ``"type"``
discriminator first, then the message fields in declaration order.
See PROTOCOL.md for byte-level examples.
"""
from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass, fields
from typing import Optional

from .errors import (
    ConnectionFailed,
    FieldInvalid,
    FieldMissing,
    FrameTruncated,
    JsonMalformed,
    PayloadTooLarge,
    ProtocolError,
    UnknownMessageType,
)
from .schema_model import DATATYPES, GridMember

MAX_PAYLOAD = 16 * 1024 * 1024
HEADER = struct.Struct(">I")

ERROR_CODES = ("PARSE_ERROR", "MAPPING_INCOMPLETE", "BACKEND_ERROR", "INTERNAL")
ACK_STATUSES = ("added", "updated")


@dataclass(frozen=True)
class Register:
    name: str
    address: str
    port: int


@dataclass(frozen=True)
class RegisterAck:
    status: str
    member_count: int


@dataclass(frozen=True)
class ListMembers:
    pass


@dataclass(frozen=True)
class MemberList:
    members: tuple = ()


@dataclass(frozen=True)
class Query:
    request_id: str
    sql: str


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    datatype: str


@dataclass(frozen=True)
class ResultOk:
    request_id: str
    columns: tuple = ()
    rows: tuple = ()


@dataclass(frozen=True)
class ResultErr:
    request_id: str
    code: str
    message: str


MESSAGE_TYPES = {cls.__name__: cls for cls in
                 (Register, RegisterAck, ListMembers, MemberList, Query, ResultOk, ResultErr)}


# ---------------------------------------------------------------------------
# value checks
# ---------------------------------------------------------------------------

def _is_value(v) -> bool:
    return v is None or isinstance(v, (str, bool, int, float))


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise FieldInvalid(message)


def _validate(msg) -> None:
    if isinstance(msg, Register):
        _check(isinstance(msg.name, str) and msg.name, "Register.name must be non-empty text")
        _check(isinstance(msg.address, str), "Register.address must be text")
        _check(_is_port(msg.port), "Register.port out of range")
    elif isinstance(msg, RegisterAck):
        _check(msg.status in ACK_STATUSES, f"unknown ack status {msg.status!r}")
        _check(_is_int(msg.member_count) and msg.member_count >= 0, "member_count must be >= 0")
    elif isinstance(msg, MemberList):
        _check(all(isinstance(m, GridMember) for m in msg.members), "members must be GridMember")
    elif isinstance(msg, Query):
        _check(isinstance(msg.request_id, str), "request_id must be text")
        _check(isinstance(msg.sql, str), "sql must be text")
    elif isinstance(msg, ResultOk):
        _check(isinstance(msg.request_id, str), "request_id must be text")
        for c in msg.columns:
            _check(isinstance(c, ColumnSpec) and c.datatype in DATATYPES, f"bad column {c!r}")
        width = len(msg.columns)
        for row in msg.rows:
            _check(len(row) == width, "row length differs from column count")
            _check(all(_is_value(v) for v in row), "row holds a non-scalar value")
    elif isinstance(msg, ResultErr):
        _check(isinstance(msg.request_id, str), "request_id must be text")
        _check(msg.code in ERROR_CODES, f"unknown error code {msg.code!r}")
        _check(isinstance(msg.message, str), "message must be text")
    elif not isinstance(msg, ListMembers):
        raise ProtocolError(f"not a message: {msg!r}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_port(v) -> bool:
    return _is_int(v) and 1 <= v <= 65535


# ---------------------------------------------------------------------------
# encode / decode
# ---------------------------------------------------------------------------

def to_json_obj(msg) -> dict:
    obj = {"type": type(msg).__name__}
    for f in fields(msg):
        value = getattr(msg, f.name)
        if isinstance(msg, MemberList):
            value = [{"name": m.name, "address": m.address, "port": m.port} for m in value]
        elif isinstance(msg, ResultOk) and f.name == "columns":
            value = [{"name": c.name, "datatype": c.datatype} for c in value]
        elif isinstance(msg, ResultOk) and f.name == "rows":
            value = [list(r) for r in value]
        obj[f.name] = value
    return obj


def encode(msg, max_payload: int = MAX_PAYLOAD) -> bytes:
    _validate(msg)
    payload = json.dumps(to_json_obj(msg), ensure_ascii=False, separators=(",", ":"),
                         allow_nan=False).encode("utf-8")
    if len(payload) > max_payload:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {max_payload}")
    return HEADER.pack(len(payload)) + payload


def _field(obj: dict, name: str):
    if name not in obj:
        raise FieldMissing(name)
    return obj[name]


def from_json_obj(obj) -> object:
    if not isinstance(obj, dict):
        raise JsonMalformed("payload is not a JSON object")
    kind = _field(obj, "type")
    cls = MESSAGE_TYPES.get(kind) if isinstance(kind, str) else None
    if cls is None:
        raise UnknownMessageType(f"unknown message type {kind!r}")
    values = {f.name: _field(obj, f.name) for f in fields(cls)}
    try:
        if cls is MemberList:
            values["members"] = tuple(
                GridMember(_field(m, "name"), _field(m, "address"), _field(m, "port"))
                for m in values["members"]
            )
        elif cls is ResultOk:
            values["columns"] = tuple(
                ColumnSpec(_field(c, "name"), _field(c, "datatype")) for c in values["columns"]
            )
            values["rows"] = tuple(tuple(r) for r in values["rows"])
    except (TypeError, AttributeError) as exc:
        raise FieldInvalid(str(exc)) from None
    except ProtocolError:
        raise
    except Exception as exc:  # GridMember validation
        raise FieldInvalid(str(exc)) from None
    msg = cls(**values)
    _validate(msg)
    return msg


def decode_payload(payload: bytes):
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise JsonMalformed(str(exc)) from None
    return from_json_obj(obj)


def decode(frame: bytes, max_payload: int = MAX_PAYLOAD):
    """Decode exactly one complete frame."""
    if len(frame) < HEADER.size:
        raise FrameTruncated("frame shorter than its length header")
    (length,) = HEADER.unpack_from(frame)
    if length > max_payload:
        raise PayloadTooLarge(f"declared payload of {length} bytes exceeds {max_payload}")
    payload = frame[HEADER.size:]
    if len(payload) < length:
        raise FrameTruncated(f"expected {length} payload bytes, got {len(payload)}")
    if len(payload) > length:
        raise ProtocolError("trailing bytes after frame")
    return decode_payload(payload)


class FrameDecoder:
    """Incremental decoder for a byte stream carrying consecutive frames."""

    def __init__(self, max_payload: int = MAX_PAYLOAD):
        self.max_payload = max_payload
        self._buf = bytearray()

    def feed(self, data: bytes) -> list:
        self._buf.extend(data)
        out = []
        while len(self._buf) >= HEADER.size:
            (length,) = HEADER.unpack_from(self._buf)
            if length > self.max_payload:
                raise PayloadTooLarge(f"declared payload of {length} bytes exceeds {self.max_payload}")
            end = HEADER.size + length
            if len(self._buf) < end:
                break
            payload = bytes(self._buf[HEADER.size:end])
            del self._buf[:end]
            out.append(decode_payload(payload))
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)


# ---------------------------------------------------------------------------
# sockets
# ---------------------------------------------------------------------------

def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 16))
        if not chunk:
            raise FrameTruncated(f"connection closed with {remaining} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def send_message(sock: socket.socket, msg) -> None:
    sock.sendall(encode(msg))


def recv_message(sock: socket.socket, max_payload: int = MAX_PAYLOAD):
    (length,) = HEADER.unpack(_recv_exact(sock, HEADER.size))
    if length > max_payload:
        raise PayloadTooLarge(f"declared payload of {length} bytes exceeds {max_payload}")
    return decode_payload(_recv_exact(sock, length))


def request(endpoint: tuple, msg, timeout: Optional[float] = 10.0):
    """Open a connection, send ``msg``, return the single reply, close."""
    try:
        sock = socket.create_connection(endpoint, timeout=timeout)
    except OSError as exc:
        raise ConnectionFailed(f"cannot connect to {endpoint[0]}:{endpoint[1]}: {exc}") from None
    with sock:
        send_message(sock, msg)
        return recv_message(sock)


def parse_endpoint(text: str) -> tuple:
    """``"host:port"`` -> ``(host, port)``."""
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit() or not 0 <= int(port) <= 65535:
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return (host or "0.0.0.0", int(port))
