import json
import socket
import struct
import threading

import pytest
from hypothesis import given, settings, strategies as st

from gridfed import wire_protocol as wire
from gridfed.errors import (
    ConnectionFailed,
    FieldInvalid,
    FieldMissing,
    FrameTruncated,
    JsonMalformed,
    PayloadTooLarge,
    UnknownMessageType,
)
from gridfed.schema_model import GridMember

from conftest import free_port


def frame(payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + payload


def test_register_example_bytes():
    data = wire.encode(wire.Register("temp", "127.0.0.1", 8888))
    payload = b'{"type":"Register","name":"temp","address":"127.0.0.1","port":8888}'
    assert data == struct.pack(">I", len(payload)) + payload
    assert data[:4] == bytes([0, 0, 0, 67])


def test_field_order_is_declaration_order():
    data = wire.encode(wire.ResultErr("q1", "PARSE_ERROR", "bad"))
    assert data[4:] == b'{"type":"ResultErr","request_id":"q1","code":"PARSE_ERROR","message":"bad"}'


def test_result_ok_layout():
    msg = wire.ResultOk("q1", (wire.ColumnSpec("studentname", "string"),), (("Alice",),))
    assert json.loads(wire.encode(msg)[4:]) == {
        "type": "ResultOk", "request_id": "q1",
        "columns": [{"name": "studentname", "datatype": "string"}], "rows": [["Alice"]],
    }
    assert wire.decode(wire.encode(msg)) == msg


def test_list_members_round_trip():
    msg = wire.MemberList((GridMember("temp", "127.0.0.1", 8888),))
    assert wire.decode(wire.encode(msg)) == msg
    assert wire.decode(wire.encode(wire.ListMembers())) == wire.ListMembers()


def test_unknown_type():
    with pytest.raises(UnknownMessageType):
        wire.decode(frame(b'{"type":"Nope"}'))


def test_missing_field():
    with pytest.raises(FieldMissing) as exc:
        wire.decode(frame(b'{"type":"Query"}'))
    assert exc.value.name == "request_id"


def test_field_order_and_extras_tolerated():
    msg = wire.decode(frame(b'{"sql":"SELECT 1","future":[1,2],"request_id":"r","type":"Query"}'))
    assert msg == wire.Query("r", "SELECT 1")


@pytest.mark.parametrize("payload", [b"not json", b"[1,2]", b"\xff\xfe", b'"text"'])
def test_malformed_json(payload):
    with pytest.raises(JsonMalformed):
        wire.decode(frame(payload))


@pytest.mark.parametrize("payload", [
    b'{"type":"Register","name":"a","address":"b","port":0}',
    b'{"type":"RegisterAck","status":"maybe","member_count":1}',
    b'{"type":"ResultErr","request_id":"r","code":"OOPS","message":""}',
    b'{"type":"ResultOk","request_id":"r","columns":[{"name":"a","datatype":"string"}],"rows":[[1,2]]}',
    b'{"type":"ResultOk","request_id":"r","columns":[{"name":"a","datatype":"blob"}],"rows":[]}',
    b'{"type":"MemberList","members":[{"name":"a","address":"b","port":"x"}]}',
])
def test_invalid_fields(payload):
    with pytest.raises(FieldInvalid):
        wire.decode(frame(payload))


def test_truncated():
    data = wire.encode(wire.Query("r", "SELECT a FROM t"))
    with pytest.raises(FrameTruncated):
        wire.decode(data[:-1])
    with pytest.raises(FrameTruncated):
        wire.decode(data[:3])


def test_payload_limit_boundary():
    # a Query whose payload is exactly MAX_PAYLOAD bytes is accepted, one more byte is not
    overhead = len(wire.encode(wire.Query("r", ""))) - 4
    at_limit = wire.Query("r", "x" * (wire.MAX_PAYLOAD - overhead))
    data = wire.encode(at_limit)
    assert len(data) - 4 == wire.MAX_PAYLOAD
    assert wire.decode(data) == at_limit
    with pytest.raises(PayloadTooLarge):
        wire.encode(wire.Query("r", "x" * (wire.MAX_PAYLOAD - overhead + 1)))


def test_declared_length_over_limit_rejected_before_reading():
    with pytest.raises(PayloadTooLarge):
        wire.FrameDecoder().feed(struct.pack(">I", wire.MAX_PAYLOAD + 1))


def test_nan_not_encodable():
    with pytest.raises(ValueError):
        wire.encode(wire.ResultOk("r", (wire.ColumnSpec("a", "float"),), ((float("nan"),),)))


def test_parse_endpoint():
    assert wire.parse_endpoint("127.0.0.1:2222") == ("127.0.0.1", 2222)
    assert wire.parse_endpoint(":2221") == ("0.0.0.0", 2221)
    for bad in ("nohost", "h:x", "h:70000"):
        with pytest.raises(ValueError):
            wire.parse_endpoint(bad)


def test_request_over_socket():
    srv = socket.socket()
    srv.bind(("127.0.0.1", 0))
    srv.listen(1)

    def serve():
        conn, _ = srv.accept()
        with conn:
            msg = wire.recv_message(conn)
            wire.send_message(conn, wire.ResultErr(msg.request_id, "INTERNAL", "echo " + msg.sql))

    t = threading.Thread(target=serve)
    t.start()
    reply = wire.request(srv.getsockname(), wire.Query("abc", "hi"), timeout=5)
    t.join()
    srv.close()
    assert reply == wire.ResultErr("abc", "INTERNAL", "echo hi")


def test_request_unreachable():
    with pytest.raises(ConnectionFailed):
        wire.request(("127.0.0.1", free_port()), wire.ListMembers(), timeout=2)


# -- properties ------------------------------------------------------------------

text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=30)
names = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=10)
ports = st.integers(1, 65535)
values = st.one_of(
    st.none(), text, st.booleans(), st.integers(-(2**53), 2**53),
    st.floats(allow_nan=False, allow_infinity=False),
)


@st.composite
def result_ok(draw):
    cols = draw(st.lists(st.tuples(names, st.sampled_from(("string", "int", "float", "bool", "date"))), max_size=4))
    rows = draw(st.lists(st.tuples(*[values for _ in cols]), max_size=5)) if cols else []
    return wire.ResultOk(draw(text), tuple(wire.ColumnSpec(n, d) for n, d in cols), tuple(rows))


messages = st.one_of(
    st.builds(wire.Register, names, text, ports),
    st.builds(wire.RegisterAck, st.sampled_from(("added", "updated")), st.integers(0, 10**6)),
    st.just(wire.ListMembers()),
    st.builds(lambda ms: wire.MemberList(tuple(ms)), st.lists(st.builds(GridMember, names, text, ports), max_size=4)),
    st.builds(wire.Query, text, text),
    result_ok(),
    st.builds(wire.ResultErr, text, st.sampled_from(wire.ERROR_CODES), text),
)


@settings(max_examples=400)
@given(messages)
def test_round_trip(msg):
    assert wire.decode(wire.encode(msg)) == msg


@settings(max_examples=200)
@given(st.lists(messages, min_size=1, max_size=6), st.data())
def test_chunking_independent(msgs, data):
    stream = b"".join(wire.encode(m) for m in msgs)
    cuts = sorted(data.draw(st.lists(st.integers(0, len(stream)), max_size=8)))
    decoder = wire.FrameDecoder()
    out = []
    prev = 0
    for c in cuts + [len(stream)]:
        out.extend(decoder.feed(stream[prev:c]))
        prev = c
    assert out == msgs
    assert decoder.pending == 0


@settings(max_examples=150)
@given(messages, st.dictionaries(st.text(min_size=1, max_size=6).map(lambda s: "x_" + s), values, max_size=3))
def test_extra_fields_ignored(msg, extras):
    obj = json.loads(wire.encode(msg)[4:])
    obj.update(extras)
    assert wire.decode(frame(json.dumps(obj).encode())) == msg


def test_protocol_document_dumps_match_encoder():
    import re
    from pathlib import Path
    text = (Path(__file__).parent.parent / "PROTOCOL.md").read_text()
    dumps = re.findall(r"```\n(00000000 .*?)\n```", text, re.S)
    decoded = []
    for block in dumps:
        data = bytes.fromhex(" ".join(line[10:58] for line in block.splitlines() if "|" in line))
        decoded.append(wire.decode(data))
        assert wire.encode(decoded[-1]) == data
    assert decoded == [
        wire.Register("temp", "127.0.0.1", 8888),
        wire.ListMembers(),
        wire.Query("q1", "SELECT studentname FROM student"),
        wire.ResultOk("q1", (wire.ColumnSpec("studentname", "string"),), (("Alice",),)),
    ]
    for block, msg in zip(dumps, decoded):
        assert block.splitlines()[-1] == f"{len(wire.encode(msg)):08x}"
