import json
import shutil
import subprocess
import sys
import time

import pytest

from gridfed import wire_protocol as wire
from gridfed.cli import build_parser, main
from gridfed.registry_service import RegistryConfig, RegistryServer
from gridfed.schema_model import GridMember, GridRegistry, load_mapping_file, load_registry_file, save_registry

from conftest import REF, LISTING_ANSWERS, SCENARIO, free_port, running_members, scenario_specs


def test_fixture_run(capsys):
    assert main(["fixture", "run", str(SCENARIO / "uni_a.sql"), "--query",
                 "SELECT STUNM, CGPA FROM STUD WHERE CGPA > 3.5 ORDER BY STUNM"]) == 0
    out = capsys.readouterr().out
    assert "| Alice | 3.8  |" in out and out.rstrip().endswith("(2 rows)")


def test_fixture_run_errors(capsys, tmp_path):
    assert main(["fixture", "run", str(tmp_path / "none.sql"), "--query", "SELECT a FROM t"]) == 2
    assert "error:" in capsys.readouterr().err


def test_remap_argument_and_stdin(capsys, monkeypatch):
    args = ["remap", "--schema", str(REF / "centre.xml"), "--mapping", str(REF / "GridMapping.xml")]
    assert main(args + ["--sql", "SELECT studentname FROM student WHERE CGPA > 3.5"]) == 0
    assert capsys.readouterr().out.strip() == "SELECT STUNM AS studentname FROM STUD WHERE CGPA > 3.5"
    monkeypatch.setattr("sys.stdin", __import__("io").StringIO("SELECT * FROM Department;\n"))
    assert main(args) == 0
    assert capsys.readouterr().out.strip() == (
        "SELECT DEPNUM AS departmentiden, DEPNAME AS departmentName, TOTALCREDIT AS TotalCredit FROM DEP")


def test_remap_reports_unknown_table(capsys):
    code = main(["remap", "--schema", str(REF / "centre.xml"), "--mapping", str(REF / "GridMapping.xml"),
                 "--sql", "SELECT teachername FROM teacher"])
    assert code == 2 and "teacher" in capsys.readouterr().err


def grid_registry(members, tmp_path):
    path = tmp_path / "GridList.xml"
    path.write_text(save_registry(GridRegistry(tuple(members))))
    return str(path)


def test_query_table_and_json(ref_schema, tmp_path, capsys):
    with running_members(scenario_specs(), ref_schema) as members:
        reg = grid_registry(members, tmp_path)
        assert main(["query", "--registry", reg, "--timeout", "5000",
                     "SELECT COUNT(*) AS n FROM student"]) == 0
        out = capsys.readouterr().out
        assert "| n |" in out and "uni_a" in out and "uni_b" in out
        assert main(["query", "--registry", reg, "--format", "json", "--provenance",
                     "SELECT studentname FROM student WHERE CGPA >= 3.8 ORDER BY studentname"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["rows"] == [["uni_a", "Alice"], ["uni_b", "Erin"]]
        assert [o["status"] for o in obj["outcomes"]] == ["ok", "ok"]
        assert main(["query", "--registry", reg, "DROP TABLE student"]) == 1


def test_query_needs_a_source(capsys):
    assert main(["query", "SELECT 1 FROM t"]) == 2
    assert "--center" in capsys.readouterr().err


def test_query_empty_grid(tmp_path, capsys):
    assert main(["query", "--registry", grid_registry([], tmp_path), "SELECT 1 FROM t"]) == 1


def test_bad_flags_rejected():
    parser = build_parser()
    for argv in (["query", "--timeout", "0", "x"], ["center", "--listen", "nohost"], ["member"]):
        with pytest.raises(SystemExit):
            parser.parse_args(argv)


def test_member_register(tmp_path, capsys):
    shutil.copy(REF / "GridList.xml", tmp_path / "GridList.xml")
    center = RegistryServer(RegistryConfig(("127.0.0.1", 0), str(tmp_path / "GridList.xml"))).start()
    try:
        host, port = center.endpoint
        assert main(["member", "register", "--center", f"{host}:{port}", "--name", "test1",
                     "--address", "172.16.43.13", "--port", "9111"]) == 0
        assert capsys.readouterr().out.strip() == "updated: test1 172.16.43.13:9111 (4 members)"
        assert main(["member", "register", "--center", f"{host}:{port}", "--name", "fresh"]) == 0
        assert "added: fresh 127.0.0.1:2222 (5 members)" in capsys.readouterr().out
    finally:
        center.stop()
    assert load_registry_file(tmp_path / "GridList.xml").members[1] == GridMember("test1", "172.16.43.13", 9111)


def test_member_register_unreachable(capsys):
    assert main(["member", "register", "--center", f"127.0.0.1:{free_port()}", "--name", "x",
                 "--address", "127.0.0.1"]) == 2


def test_member_setup_scripted(tmp_path, capsys):
    shutil.copy(SCENARIO / "uni_a.sql", tmp_path / "uni_a.sql")
    answers = tmp_path / "answers.txt"
    answers.write_text("\n".join(LISTING_ANSWERS + ["y"]) + "\n")
    out_path = tmp_path / "GridMapping.xml"
    assert main(["member", "setup", "--schema", str(REF / "centre.xml"), "--answers", str(answers),
                 "--output", str(out_path), "--no-serve"]) == 0
    mapping = load_mapping_file(out_path)
    assert mapping.tables == load_mapping_file(REF / "GridMapping.xml").tables
    assert "Wrote" in capsys.readouterr().out


def _wait_for(endpoint, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            return wire.request(endpoint, wire.ListMembers(), timeout=1)
        except Exception:  # noqa: BLE001 - not up yet
            time.sleep(0.05)
    raise AssertionError(f"nothing answered on {endpoint}")


@pytest.mark.slow
def test_console_script_processes(tmp_path):
    """Center and member run as real ``gridctl`` processes; a query goes through both."""
    gridctl = [sys.executable, "-m", "gridfed.cli"]
    cport, mport = free_port(), free_port()
    procs = [
        subprocess.Popen(gridctl + ["center", "--listen", f"127.0.0.1:{cport}",
                                    "--registry", str(tmp_path / "GridList.xml")],
                         stdout=subprocess.DEVNULL, stderr=subprocess.PIPE),
        subprocess.Popen(gridctl + ["member", "serve", "--mapping", str(SCENARIO / "mapping_a.xml"),
                                    "--schema", str(REF / "centre.xml"), "--host", "127.0.0.1",
                                    "--port", str(mport)],
                         stdout=subprocess.DEVNULL, stderr=subprocess.PIPE),
    ]
    try:
        _wait_for(("127.0.0.1", cport))
        run = lambda *a: subprocess.run(gridctl + list(a), capture_output=True, text=True, timeout=30)  # noqa: E731
        reg = run("member", "register", "--center", f"127.0.0.1:{cport}", "--name", "uni_a",
                  "--address", "127.0.0.1", "--port", str(mport))
        assert reg.returncode == 0, reg.stderr
        deadline = time.monotonic() + 10
        while True:
            q = run("query", "--center", f"127.0.0.1:{cport}", "--format", "json",
                    "SELECT studentname FROM student WHERE CGPA > 3.5 ORDER BY studentname")
            if q.returncode == 0 or time.monotonic() > deadline:
                break
            time.sleep(0.1)  # the member process may still be starting
        assert q.returncode == 0, q.stdout + q.stderr
        assert json.loads(q.stdout)["rows"] == [["Alice"], ["Carol"]]
        assert run("--help").returncode == 0
    finally:
        for p in procs:
            p.terminate()
            p.wait(timeout=10)
    center_log = procs[0].stderr.read().decode()
    assert "registration added: uni_a" in center_log
