import json

import numpy as np

from eddpc.cli import EXIT_CODES, main
from eddpc.lti import LtiSystem, simulate


def _sys(tmp_path, order=4, seed=1):
    path = tmp_path / "sys.json"
    assert main(["gen-sys", "--order", str(order), "--seed", str(seed), "--out", str(path)]) == 0
    return path


def test_offline_online_pipeline(tmp_path, capsys):
    sp = _sys(tmp_path)
    lag = LtiSystem.load(sp).lag
    T = 3 * (lag + 5) - 1
    assert main(["collect", "--system", str(sp), "-T", str(T), "--seed", "2",
                 "--out", str(tmp_path / "d.csv")]) == 0
    assert main(["preprocess", "--data", str(tmp_path / "d.csv"), "--system", str(sp),
                 "--out", str(tmp_path / "p.json")]) == 0
    info = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert info["cols"] == 28
    assert main(["run", "--system", str(sp), "--predictor", str(tmp_path / "p.json"),
                 "--seed", "3", "--out", str(tmp_path / "log.jsonl"),
                 "--csv", str(tmp_path / "log.csv")]) == 0
    assert (tmp_path / "log.jsonl").exists() and (tmp_path / "log.csv").exists()


def test_collect_below_bound_fails(tmp_path, capsys):
    sp = _sys(tmp_path)
    lag = LtiSystem.load(sp).lag
    code = main(["collect", "--system", str(sp), "-T", str(3 * (lag + 5) - 2),
                 "--out", str(tmp_path / "d.csv")])
    assert code == EXIT_CODES["excitation"] != 0
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "excitation"


def test_preprocess_integrator(tmp_path, capsys):
    sys = LtiSystem(np.eye(1), np.eye(1), np.eye(1))
    simulate(sys, [0.0], np.random.default_rng(0).uniform(-1, 1, (15, 1))).to_csv(tmp_path / "d.csv")
    assert main(["preprocess", "--data", str(tmp_path / "d.csv"), "--order", "1", "--horizon", "2",
                 "--out", str(tmp_path / "p.json")]) == 0
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["cols"] == 4


def test_compare(tmp_path, capsys):
    out = tmp_path / "cmp.json"
    assert main(["compare", "--order", "4", "--seed", "5", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["max_deviation"] <= 1e-5 and rep["steps"] == 30


def test_table1(capsys):
    assert main(["table1", "--order", "6"]) == 0
    out = capsys.readouterr().out
    assert "min_T=119" in out and "min_T=64" in out and "dim=156" in out


def test_error_categories(tmp_path, capsys):
    assert main(["preprocess", "--data", str(tmp_path / "missing.csv"), "--order", "2",
                 "--out", str(tmp_path / "p.json")]) == EXIT_CODES["parse"]
    (tmp_path / "bad.csv").write_text("u_1,y_1\n1,x\n")
    assert main(["preprocess", "--data", str(tmp_path / "bad.csv"), "--order", "1",
                 "--out", str(tmp_path / "p.json")]) == EXIT_CODES["parse"]
    sys = LtiSystem(np.eye(1), np.eye(1), np.eye(1))
    simulate(sys, [0.0], np.zeros((15, 1))).to_csv(tmp_path / "z.csv")
    assert main(["preprocess", "--data", str(tmp_path / "z.csv"), "--order", "1",
                 "--out", str(tmp_path / "p.json")]) == EXIT_CODES["excitation"]


def test_bench_subcommand(tmp_path, capsys):
    assert main(["bench", "--order", "4", "--systems", "1", "--steps", "4",
                 "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "bench.csv").exists()
