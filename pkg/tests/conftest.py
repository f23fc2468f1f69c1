import contextlib
import socket
import threading
import time
from pathlib import Path

import pytest

from gridfed.backends import EmbeddedBackend, open_backend
from gridfed.member_agent import MemberServer
from gridfed.schema_model import (
    GridMember,
    load_mapping_file,
    load_registry_file,
    load_virtual_schema_file,
)

DATA = Path(__file__).parent / "data"
REF = DATA / "reference"
SCENARIO = DATA / "scenario"


# wizard answers that reproduce the reference mapping over uni_a.sql:
# backend, fixture, the five student columns, the three department columns, name, address, port
LISTING_ANSWERS = [
    "", "uni_a.sql",
    "STUD", "STUID", "STUNM", "DEPTNUM", "", "",
    "DEP", "DEPNUM", "DEPNAME", "",
    "siteA", "127.0.0.1", "",
]


def scenario_specs():
    """``(name, mapping, backend)`` for the two scenario members."""
    return [
        ("uni_a", load_mapping_file(SCENARIO / "mapping_a.xml"), open_backend("embedded", str(SCENARIO / "uni_a.sql"))),
        ("uni_b", load_mapping_file(SCENARIO / "mapping_b.xml"), open_backend("embedded", str(SCENARIO / "uni_b.sql"))),
    ]


@pytest.fixture
def ref_schema():
    return load_virtual_schema_file(REF / "centre.xml")


@pytest.fixture
def ref_mapping():
    return load_mapping_file(REF / "GridMapping.xml")


@pytest.fixture
def ref_registry():
    return load_registry_file(REF / "GridList.xml")


class SlowBackend(EmbeddedBackend):
    """Embedded backend that sleeps before answering."""

    def __init__(self, db, delay):
        super().__init__(db)
        self.delay = delay

    def execute_select(self, query):
        time.sleep(self.delay)
        return super().execute_select(query)


@contextlib.contextmanager
def running_members(specs, schema):
    """Start one MemberServer per ``(name, mapping, backend)``; yield GridMembers."""
    servers, members = [], []
    try:
        for name, mapping, backend in specs:
            server = MemberServer(mapping, schema, backend, "127.0.0.1", 0).start()
            servers.append(server)
            members.append(GridMember(name, "127.0.0.1", server.endpoint[1]))
        yield members
    finally:
        for s in servers:
            s.stop()


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@contextlib.contextmanager
def silent_listener():
    """A socket that accepts connections and never answers."""
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    sock.listen(16)
    accepted = []
    stop = threading.Event()

    def loop():
        sock.settimeout(0.05)
        while not stop.is_set():
            try:
                conn, _ = sock.accept()
                accepted.append(conn)
            except OSError:
                continue

    t = threading.Thread(target=loop, daemon=True)
    t.start()
    try:
        yield ("127.0.0.1", sock.getsockname()[1])
    finally:
        stop.set()
        t.join()
        for c in accepted:
            c.close()
        sock.close()


# -- acceptance verdicts -----------------------------------------------------------

VERDICTS = {}  # criterion number -> [title, passed]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        number, title = marker.args
        entry = VERDICTS.setdefault(number, [title, True])
        entry[1] = entry[1] and report.passed


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(VERDICTS):
            title, passed = VERDICTS[number]
            terminalreporter.write_line(f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {title}")
