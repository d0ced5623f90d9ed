import json
import math

import numpy as np
import pytest

from hyperstab import cli, spectral
from hyperstab.delay import DelaySystem


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out.strip()
    return code, out


def test_rho_subcommand(tmp_path, capsys):
    mpath = tmp_path / "m.txt"
    spectral.write_matrix(mpath, [[1.0, 1.0], [-1.0, 1.0]])
    code, out = run_cli(capsys, "rho", "--matrix", str(mpath), "--p", "2")
    assert code == 0
    rec = json.loads(out)
    assert rec["value"] == pytest.approx(math.sqrt(2), abs=1e-6)
    assert len(rec["witness"]) == 2 and rec["iterations"] > 0

    code, out = run_cli(capsys, "rho", "--matrix", str(mpath), "--p", "zero")
    assert code == 0
    rec = json.loads(out)
    assert rec["value"] == pytest.approx(math.sqrt(2), abs=1e-4)


def test_rho_missing_file_exit_code(capsys):
    code, _ = run_cli(capsys, "rho", "--matrix", "/nonexistent/m.txt")
    assert code == 3


def test_delay_sim_and_roots(tmp_path, capsys):
    spath = tmp_path / "sys.txt"
    DelaySystem([[0.5]], [1.0]).to_file(spath)
    out_csv = tmp_path / "sig.csv"
    code, out = run_cli(capsys, "delay-sim", "--system", str(spath),
                        "--T", "4", "--out", str(out_csv))
    assert code == 0
    rec = json.loads(out)
    assert rec["final"][0] == pytest.approx(0.5 ** 5, abs=1e-12)
    first = out_csv.read_bytes()
    run_cli(capsys, "delay-sim", "--system", str(spath), "--T", "4",
            "--out", str(out_csv))
    assert out_csv.read_bytes() == first       # byte-identical reruns

    code, out = run_cli(capsys, "delay-roots", "--system", str(spath),
                        "--rect=-2,1,10")
    assert code == 0
    rec = json.loads(out)
    assert rec["complete"] and rec["winding"] == len(rec["roots"])
    assert rec["rightmost"] == pytest.approx(-math.log(2), abs=1e-9)


def test_delay_sweep(tmp_path, capsys):
    spath = tmp_path / "sys.txt"
    DelaySystem([[0.5]], [1.0]).to_file(spath)
    code, out = run_cli(capsys, "delay-sweep", "--system", str(spath),
                        "--eps", "0.05", "--samples", "4",
                        "--rect=-2,0.5,8")
    assert code == 0
    rec = json.loads(out)
    assert rec["worst_real_part"] < 0
    assert "robustly stable" in rec["verdict"]


def test_pde_sim_bump_preset(tmp_path, capsys):
    spath = tmp_path / "hsys.txt"
    spath.write_text("n 1\nspeeds 1.0\n0.5\n")
    out_dir = tmp_path / "run"
    code, out = run_cli(capsys, "pde-sim", "--system", str(spath),
                        "--u0", "bump:center=0.5,width=0.2,amp=0.01",
                        "--T", "2.0", "--cells", "128",
                        "--norms", "c0,c1", "--out", str(out_dir))
    assert code == 0
    rec = json.loads(out)
    assert rec["final_norms"]["c0"] == pytest.approx(0.01 * 0.25, rel=1e-6)
    for name in ("norms.csv", "final_state.csv", "trace.csv"):
        assert (out_dir / name).exists()


def test_counterexample_command(tmp_path, capsys):
    out_dir = tmp_path / "ce"
    code, out = run_cli(capsys, "counterexample", "--T", "4.0",
                        "--eps", "2e-3", "--cells", "200",
                        "--out", str(out_dir), "--svg")
    assert code == 0
    rec = json.loads(out)
    assert rec["passed"]
    for name in ("tree.csv", "trace.csv", "u0.csv", "certificate.txt",
                 "characteristics.svg", "norm_growth.svg"):
        assert (out_dir / name).exists(), name
    cert = (out_dir / "certificate.txt").read_text()
    assert cert.startswith("growth-certificate")


def test_sweep_and_duplicate_ids(tmp_path, capsys):
    config = {
        "out": str(tmp_path / "sweep"),
        "experiments": [
            {"id": "a", "kind": "rho",
             "params": {"matrix": [[1, 1], [-1, 1]], "p": 2}},
            {"id": "b", "kind": "rho",
             "params": {"matrix": [[0.5, 0], [0, 0.25]], "p": "inf"}},
        ],
    }
    cpath = tmp_path / "cfg.json"
    cpath.write_text(json.dumps(config))
    code, out = run_cli(capsys, "sweep", str(cpath))
    assert code == 0
    summary = json.loads(out)
    assert summary["passed"]
    vals = {r["id"]: r["result"]["value"] for r in summary["experiments"]}
    assert vals["a"] == pytest.approx(math.sqrt(2), abs=1e-6)
    assert vals["b"] == pytest.approx(0.5, abs=1e-6)
    assert (tmp_path / "sweep" / "summary.json").exists()

    config["experiments"][1]["id"] = "a"
    cpath.write_text(json.dumps(config))
    code, _ = run_cli(capsys, "sweep", str(cpath))
    assert code == 2

    config["experiments"][1] = {"id": "c", "kind": "nope", "params": {}}
    cpath.write_text(json.dumps(config))
    code, out = run_cli(capsys, "sweep", str(cpath))
    assert code == 1          # child error propagates as failure
    assert json.loads(out)["experiments"][1]["status"] == "error"


def test_sweep_empty_experiment_list(tmp_path, capsys):
    cpath = tmp_path / "empty.json"
    cpath.write_text(json.dumps({"experiments": []}))
    code, out = run_cli(capsys, "sweep", str(cpath))
    assert code == 0
    assert json.loads(out)["experiments"] == []


def test_accept_single_criterion(tmp_path, capsys):
    out = tmp_path / "acc.json"
    code, text = run_cli(capsys, "accept", "--ids", "1", "--out", str(out))
    assert code == 0
    assert "criterion 1" in text and "PASS" in text
    payload = json.loads(out.read_text())
    assert payload[0]["passed"]
