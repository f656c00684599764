import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from metarounding.cli import TRACE_HEADER, main
from metarounding.online import LEDGER_HEADER
from metarounding.setcover import SetCoverInstance


@pytest.fixture
def inst_path(tmp_path):
    p = tmp_path / "inst.json"
    assert main(["gen", "--m", "6", "--n", "15", "--seed", "42", "--out", str(p)]) == 0
    return p


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_gen_round_trip(inst_path, tmp_path):
    inst = SetCoverInstance.from_json(inst_path.read_text())
    assert (inst.m, inst.n, inst.seed) == (6, 15, 42)
    again = tmp_path / "again.json"
    main(["gen", "--m", "6", "--n", "15", "--seed", "42", "--out", str(again)])
    assert again.read_bytes() == inst_path.read_bytes()
    assert b"\r\n" not in again.read_bytes()


def test_existing_output_needs_force(inst_path, capsys):
    assert main(["gen", "--m", "6", "--n", "15", "--seed", "1", "--out", str(inst_path)]) == 1
    assert "--force" in capsys.readouterr().err
    assert main(["gen", "--m", "6", "--n", "15", "--seed", "1", "--out", str(inst_path), "--force"]) == 0
    assert SetCoverInstance.from_json(inst_path.read_text()).seed == 1


def test_missing_inputs_fail(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "nope.json")]) == 1
    assert main(["gen", "--m", "3", "--n", "3", "--out", str(tmp_path / "no" / "dir.json")]) == 1


def test_solve_certificate_and_trace(inst_path, tmp_path):
    out, trace = tmp_path / "s.json", tmp_path / "t.csv"
    args = ["solve", "--instance", str(inst_path), "--eps", "0.1", "--seed", "3"]
    assert main(args + ["--out", str(out), "--trace-out", str(trace)]) == 0
    s = json.loads(out.read_text())
    assert s["certified"] and s["certified_value"] <= s["alpha_emp"] + 0.1 + 1e-6
    assert abs(sum(s["weights"]) - 1) < 1e-9 and len(s["columns"]) == len(s["weights"])
    assert "wall_time" not in s
    rows = read_csv(trace)
    assert rows[0] == TRACE_HEADER and len(rows) == s["iterations"] + 2
    assert all(r[-1] == "" for r in rows[1:])
    assert float(rows[-1][1]) <= 0.05


def test_solve_instance_cost(inst_path, tmp_path):
    out = tmp_path / "s.json"
    main(["solve", "--instance", str(inst_path), "--use-instance-cost", "--out", str(out)])
    inst = SetCoverInstance.from_json(inst_path.read_text())
    assert np.allclose(json.loads(out.read_text())["cost"], inst.cost)


def test_smaller_eps_never_fewer_iterations(inst_path, tmp_path):
    iters = []
    for eps in ("0.5", "0.2", "0.05"):
        out = tmp_path / f"s{eps}.json"
        main(["solve", "--instance", str(inst_path), "--eps", eps, "--seed", "1", "--out", str(out)])
        iters.append(json.loads(out.read_text())["iterations"])
    assert iters == sorted(iters)


def test_online_rows(inst_path, tmp_path):
    for mode in ("metaround", "fpl"):
        out = tmp_path / f"{mode}.csv"
        assert main(["online", "--instance", str(inst_path), "--T", "10", "--mode", mode, "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == LEDGER_HEADER and len(rows) == 11
        assert [int(r[0]) for r in rows[1:]] == list(range(1, 11))


def test_online_replays_loss_file(inst_path, tmp_path):
    losses = np.random.default_rng(0).random((4, 15))
    lf = tmp_path / "losses.csv"
    np.savetxt(lf, losses, delimiter=",")
    out = tmp_path / "o.csv"
    assert main(["online", "--instance", str(inst_path), "--T", "4", "--losses", str(lf), "--out", str(out)]) == 0
    assert main(["online", "--instance", str(inst_path), "--T", "5", "--losses", str(lf),
                 "--out", str(tmp_path / "o5.csv")]) == 1


def test_same_seed_same_bytes(inst_path, tmp_path):
    runs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        main(["solve", "--instance", str(inst_path), "--seed", "7", "--out", str(d / "s.json"),
              "--trace-out", str(d / "t.csv")])
        main(["online", "--instance", str(inst_path), "--T", "12", "--seed", "7", "--out", str(d / "o.csv")])
        main(["sweep", "--m", "5", "--n-list", "10,20", "--seed", "7", "--workers", "1", "--out", str(d / "w.csv")])
        runs.append({f: (d / f).read_bytes() for f in ("s.json", "t.csv", "o.csv", "w.csv")})
    assert runs[0] == runs[1]


def test_meta_seed_environment(inst_path, tmp_path, monkeypatch):
    monkeypatch.setenv("META_SEED", "11")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["solve", "--instance", str(inst_path), "--out", str(a)])
    main(["solve", "--instance", str(inst_path), "--seed", "11", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("META_SEED", "eleven")
    assert main(["solve", "--instance", str(inst_path), "--out", str(tmp_path / "c.json")]) == 1


def test_sweep_rows(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["sweep", "--m", "5", "--n-list", "10,20", "--repeats", "2", "--workers", "1",
                 "--timing", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 5
    assert [(r[0], r[1]) for r in rows[1:]] == [("10", "0"), ("10", "1"), ("20", "0"), ("20", "1")]
    assert all(r[-1] == "ok" and float(r[3]) > 0 for r in rows[1:])


def test_sweep_partial_failure_exit_code(tmp_path):
    out = tmp_path / "w.csv"
    # a single set almost never covers three items at density 0.01
    code = main(["sweep", "--m", "3", "--n-list", "1,200", "--density", "0.01", "--workers", "1",
                 "--out", str(out)])
    assert code == 2
    rows = read_csv(out)
    assert rows[1][-1] == "error:GenerationFailed" and rows[2][-1] == "ok"


@pytest.mark.skipif(shutil.which("meta") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = tmp_path / "i.json"
    r = subprocess.run(["meta", "gen", "--m", "3", "--n", "4", "--out", str(out)], capture_output=True)
    assert r.returncode == 0 and out.exists()
    r = subprocess.run(["meta", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "sweep" in r.stdout
