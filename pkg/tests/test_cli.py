import json
import socket
import threading
import time

import pytest
import uvicorn

from cutbroker.cli import main
from cutbroker.service.app import app

BELL = "qreg q[2]; h q[0]; cx q[0],q[1];\n"
SMALL = {
    "circuit": {"kind": "ghz", "n": 4},
    "qpus": [{"id": "a"}, {"id": "b"}],
    "shots": 100,
    "evaluations": 4,
    "probes": 2,
}


@pytest.fixture
def files(tmp_path):
    (tmp_path / "bell.qasm").write_text(BELL)
    (tmp_path / "wide.qasm").write_text("qreg q[17]; h q[0]; cx q[0],q[1];\n")
    (tmp_path / "small.json").write_text(json.dumps(SMALL))
    (tmp_path / "bad.json").write_text(json.dumps({**SMALL, "shots": -1}))
    (tmp_path / "broken.json").write_text("{")
    return tmp_path


@pytest.fixture(scope="module")
def server():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    srv = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    thread = threading.Thread(target=srv.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not srv.started and time.time() < deadline:
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    srv.should_exit = True
    thread.join(5)


def test_simulate(files, capsys):
    assert main(["simulate", "--qasm", str(files / "bell.qasm"), "--shots", "200"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["expectation"] == 1.0 and out["shots"] == 200


def test_cut_check(files, capsys):
    assert main(["cut-check", "--qasm", str(files / "bell.qasm"), "--cuts", "0:0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["within_tolerance"] and out["terms"] == 4


def test_cut_check_too_wide_is_runtime(files):
    assert main(["cut-check", "--qasm", str(files / "wide.qasm"), "--cuts", "0:0"]) == 3


@pytest.mark.parametrize("argv", [
    ["cut-check", "--qasm", "{d}/bell.qasm", "--cuts", "zero"],
    ["cut-check", "--qasm", "{d}/missing.qasm", "--cuts", "0:0"],
    ["simulate", "--qasm", "{d}/bell.qasm", "--shots", "0"],
    ["run-integrity", "--config", "{d}/bad.json", "--out", "{d}/o"],
    ["run-integrity", "--config", "{d}/broken.json", "--out", "{d}/o"],
    ["run-integrity", "--config", "{d}/small.json", "--out", "{d}/o", "--format", "pdf"],
    ["frobnicate"],
])
def test_config_errors_exit_2(files, argv):
    assert main([a.format(d=files) for a in argv]) == 2


def test_runtime_error_exits_3(files, capsys):
    assert main(["simulate", "--qasm", str(files / "wide.qasm"), "--shots", "1"]) == 3
    assert "error" in capsys.readouterr().err


def test_bad_config_message_names_field(files, capsys):
    main(["run-integrity", "--config", str(files / "bad.json"), "--out", str(files / "o")])
    assert "shots" in capsys.readouterr().err


def test_run_integrity(files, capsys):
    out = files / "int"
    assert main(["run-integrity", "--config", str(files / "small.json"), "--out", str(out), "--seed", "3"]) == 0
    printed = capsys.readouterr().out
    assert "saboteurs=0\thellinger=0.0000" in printed and "tolerated_attackers=" in printed
    assert {p.name for p in out.iterdir()} >= {"report.json", "sweep.csv", "hist_0.svg"}
    assert json.loads((out / "report.json").read_text())["config"]["master_seed"] == 3


def test_run_confidentiality(files, capsys):
    out = files / "conf"
    argv = ["run-confidentiality", "--config", str(files / "small.json"), "--compare", "ghz:4", "dj:3",
            "--out", str(out), "--format", "csv"]
    assert main(argv) == 0
    assert [p.name for p in out.iterdir()] == ["sweep.csv"]
    assert "dj:3" in capsys.readouterr().out


def test_unwritable_out_exits_3(files):
    (files / "blocker").write_text("")
    argv = ["run-integrity", "--config", str(files / "small.json"), "--out", str(files / "blocker" / "x")]
    assert main(argv) == 3


def test_remote_matches_local(files, server, capsys):
    argv = ["run-integrity", "--config", str(files / "small.json"), "--out"]
    assert main(argv + [str(files / "local")]) == 0
    assert main(argv + [str(files / "remote"), "--server", server]) == 0
    assert (files / "local" / "report.json").read_bytes() == (files / "remote" / "report.json").read_bytes()
    capsys.readouterr()
    assert main(["simulate", "--qasm", str(files / "bell.qasm"), "--server", server]) == 0
    assert json.loads(capsys.readouterr().out)["expectation"] == 1.0


def test_remote_error_codes(files, server):
    assert main(["simulate", "--qasm", str(files / "bell.qasm"), "--shots", "0", "--server", server]) == 2
    assert main(["simulate", "--qasm", str(files / "wide.qasm"), "--server", server]) == 3
    assert main(["simulate", "--qasm", str(files / "bell.qasm"), "--server", "http://127.0.0.1:9"]) == 3
