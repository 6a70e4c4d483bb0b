import json
import subprocess
import sys

import pytest

from conftest import FIXTURES, write_call_log_bin
from forenorm.cli import detect_format, main
from forenorm.exchange import parse


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def logon_doc(tmp_path, capsys):
    traces = tmp_path / "traces.json"
    code, _, err = run(["ingest", FIXTURES / "security_logon.xml", "--profile", "windows_eventlog",
                        "--out", traces], capsys)
    assert code == 0, err
    derived = tmp_path / "derived.json"
    code, _, err = run(["derive", traces, "--rules", "windows_logon", "--out", derived], capsys)
    assert code == 0, err
    return derived


@pytest.fixture
def leak_doc(tmp_path, capsys):
    traces = tmp_path / "leak.json"
    run(["ingest", FIXTURES / "leak_timeline.csv", "--profile", "plaso_timeline", "--out", traces], capsys)
    derived = tmp_path / "leak_events.json"
    run(["derive", traces, "--rules", FIXTURES / "leak_rules.yaml", "--out", derived], capsys)
    return derived


def test_ingest_reports_counts(tmp_path, capsys):
    code, out, err = run(["ingest", FIXTURES / "timeline_dirty.csv", "--profile", "plaso_timeline"], capsys)
    assert code == 0
    assert "timeline_csv: ingested 2, skipped 2" in err
    assert err.count("skipped ") == 3
    assert "RowArityError" in err
    assert len(parse(out.encode()).traces) == 2


def test_ingest_many_inputs_continue_ids(tmp_path, capsys):
    code, out, err = run(["ingest", FIXTURES / "security_logon.xml", FIXTURES / "security_events.xml",
                          "--profile", "windows_eventlog"], capsys)
    assert code == 0
    c = parse(out.encode())
    assert [t.id for t in c.traces] == [f"trace{i}" for i in range(1, 6)]


def test_ingest_relational_table(tmp_path, capsys):
    code, out, _ = run(["ingest", FIXTURES / "call_log.json", "--profile", "call_log",
                        "--table", "call_log"], capsys)
    assert code == 0
    c = parse(out.encode())
    assert len(c.traces) == 5 and c.traces[0].category.value == "call"


def test_ingest_malformed_header_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,time,desc\n1,2,3\n")
    code, out, err = run(["ingest", bad, "--profile", "plaso_timeline", "--input-format", "timeline_csv"],
                         capsys)
    assert code == 1 and out == ""
    assert "MalformedHeader" in err and "bad.csv" in err


def test_ingest_bad_profile_exit_1(tmp_path, capsys):
    prof = tmp_path / "p.yaml"
    prof.write_text("name: p\nartifact_type: X\ncategory: telephone\nfield_rules: []\n")
    code, _, err = run(["ingest", FIXTURES / "security_logon.xml", "--profile", prof], capsys)
    assert code == 1 and "UnknownCategory" in err


@pytest.mark.parametrize("argv", [
    ["ingest"],
    ["ingest", "nope.csv", "--profile", "plaso_timeline"],
    ["ingest", "tests/fixtures/leak_timeline.csv"],
    ["ingest", "tests/fixtures/leak_timeline.csv", "--profile", "no_such_profile"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys, monkeypatch):
    monkeypatch.chdir(FIXTURES.parent.parent)
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_derive_warnings(tmp_path, capsys):
    traces = tmp_path / "t.json"
    run(["ingest", FIXTURES / "security_logon.xml", "--profile", "windows_eventlog", "--out", traces], capsys)
    code, out, err = run(["derive", traces, "--rules", "windows_logon", "--rules",
                          FIXTURES / "broken_rule.yaml"], capsys)
    assert code == 0
    assert "events created 1, skipped 1" in err
    assert "warnings: 1" in err
    assert "TargetUserName" in err
    assert len(parse(out.encode()).events) == 1


def test_query_who(logon_doc, capsys):
    code, out, _ = run(["query", logon_doc, "--who", "Jaehyeok"], capsys)
    assert code == 0
    assert out == "Jaehyeok logged on at 2019-07-14 by trace1\n1 events\n"


def test_query_traces_and_time(logon_doc, capsys):
    _, out, _ = run(["query", logon_doc, "--from", "2019-07-14", "--to", "2019-07-14", "--traces"], capsys)
    assert "trace1 [system] WinEventLog security.evtx" in out
    assert out.endswith("1 events\n1 traces\n")
    _, out, _ = run(["query", logon_doc, "--from", "2019-07-15"], capsys)
    assert out == "0 events\n"


def test_query_bad_time_is_usage_error(logon_doc):
    with pytest.raises(SystemExit) as info:
        main(["query", str(logon_doc), "--from", "soon"])
    assert info.value.code == 2


def test_query_leak(leak_doc, capsys, tmp_path):
    _, out, _ = run(["query", leak_doc, "--who", "Tom"], capsys)
    lines = out.splitlines()
    assert lines[-1] == "4 events" and len(lines) == 5
    fig = tmp_path / "tom.png"
    _, out, _ = run(["query", leak_doc, "--subject", "Tom", "--figure", fig], capsys)
    assert "4 events for Tom" in out
    assert fig.stat().st_size > 0


def test_query_category(leak_doc, capsys):
    _, out, _ = run(["query", leak_doc, "--category", "cloud"], capsys)
    assert out.splitlines()[-1] == "1 events"
    assert "uploaded to cloud storage" in out


def test_query_rejects_dangling(tmp_path, logon_doc, capsys):
    doc = json.loads(logon_doc.read_text())
    doc["objects"][1]["etc"]["source"] = ["trace9"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out, err = run(["query", bad], capsys)
    assert code == 1 and "IntegrityError" in err


def test_export(logon_doc, capsys):
    _, out, _ = run(["export", logon_doc], capsys)
    assert out.encode() == logon_doc.read_bytes()
    _, out, _ = run(["export", logon_doc, "--format", "stix"], capsys)
    assert json.loads(out)["type"] == "bundle"


def test_compare(tmp_path, capsys):
    key = tmp_path / "call_log_answer_key.yaml"
    key.write_bytes((FIXTURES / "call_log_answer_key.yaml").read_bytes())
    fig = tmp_path / "m.png"
    code, out, _ = run(["compare", key, FIXTURES / "call_log_tool_a.yaml", FIXTURES / "call_log_tool_b.yaml",
                        "--figure", fig], capsys)
    assert code == 0
    assert "Ranking: A > B" in out and "B: TP=2 NS=2 FP=1" in out
    assert fig.read_bytes().startswith(b"\x89PNG")

    with pytest.raises(SystemExit) as info:
        main(["compare", str(key), str(FIXTURES / "call_log_tool_a.yaml"), "--strict"])
    assert info.value.code == 2

    write_call_log_bin(tmp_path / "call_log.db")
    code, out, _ = run(["compare", key, FIXTURES / "call_log_tool_a.yaml", "--strict"], capsys)
    assert code == 0
    assert "who: From: ok" in out and "how: Application: mismatch" in out


def test_deterministic_bytes(tmp_path, capsys):
    outs = []
    for i in range(2):
        p = tmp_path / f"{i}.json"
        run(["ingest", FIXTURES / "leak_timeline.csv", "--profile", "plaso_timeline", "--out", p], capsys)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("name,fmt", [
    ("security_logon.xml", "eventlog_export"),
    ("security_events.csv", "eventlog_export"),
    ("call_log.json", "relational_export"),
    ("leak_timeline.csv", "timeline_csv"),
])
def test_detect_format(name, fmt):
    assert detect_format((FIXTURES / name).read_bytes()) == fmt
    assert detect_format(b"SQLite format 3\x00...") == "relational_export"
    assert detect_format(b"a;b\n1;2\n") == "delimited"


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "forenorm", "--version"], capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.startswith("forenorm ")
