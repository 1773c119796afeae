import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from wdro.cli import run

from oracles import example7_oracle


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture()
def files(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 2))
    y = X @ [0.5, 0.5] + rng.normal(size=60)
    reg = tmp_path / "reg.csv"
    np.savetxt(reg, np.column_stack([X, y]), delimiter=",", header="x1,x2,y", comments="", fmt="%.17g")
    ret = tmp_path / "ret.csv"
    np.savetxt(ret, 0.05 + 0.1 * rng.normal(size=(100, 2)), delimiter=",", header="r1,r2",
               comments="", fmt="%.17g")
    a = rng.integers(0, 2, 200)
    lab = rng.integers(0, 2, 200)
    fair = tmp_path / "fair.csv"
    np.savetxt(fair, np.column_stack([rng.normal(size=(200, 2)), a, lab]), delimiter=",",
               header="x1,x2,a,y", comments="", fmt="%.17g")
    P = tmp_path / "P.csv"
    P.write_text("x,w\n0,1\n")
    Q = tmp_path / "Q.csv"
    Q.write_text("x,w\n3,1\n")
    cfg = tmp_path / "scatter.json"
    cfg.write_text(json.dumps({"modelSpec": {"thetaStar": [0.5, 0.5], "rho": 0.95}, "n": 50,
                               "reps": 8, "radiusRule": {"type": "fixed", "delta": 0.05}, "seed": 1}))
    inf = tmp_path / "infsup.json"
    inf.write_text(json.dumps({"seed": 2, "instances": 2}))
    return {k: str(v) for k, v in dict(reg=reg, ret=ret, fair=fair, P=P, Q=Q, cfg=cfg, inf=inf).items()}


def test_highdim_radius():
    code, out, _ = _run(["radius", "--highdim", "--n", "100", "--d", "10", "--alpha", "0.05"])
    assert code == 0
    rep = json.loads(out)
    assert rep["outputs"]["sqrtDelta"] == pytest.approx(0.7725, abs=5e-5)
    assert rep["outputs"]["sqrtDelta"] == pytest.approx(example7_oracle(100, 10, 0.05), abs=1e-12)


def test_unknown_flag_is_usage_error():
    code, out, err = _run(["radius", "--alpha", "0.1", "--nope"])
    assert code == 2 and out == "" and "usage" in err


def test_missing_subcommand_is_usage_error():
    assert _run([])[0] == 2


def test_fit_with_alpha_echoes_radius(files):
    code, out, _ = _run(["fit", "--data", files["reg"], "--alpha", "0.05", "--seed", "4"])
    rep = json.loads(out)
    assert code == 0
    assert rep["outputs"]["delta"] == rep["outputs"]["radius"]["delta"] > 0
    assert rep["config"]["delta"] == rep["outputs"]["delta"]
    assert rep["config"]["k"] == 1000 and rep["config"]["response"] == "y"


def test_computation_error_object(files):
    code, out, _ = _run(["fit", "--data", files["ret"], "--loss", "portfolio", "--delta", "0.01",
                         "--target-return", "5"])
    assert code == 1
    assert json.loads(out)["error"]["type"] == "Infeasible"


def test_each_command_runs(files):
    cmds = [
        ["ot", "--source", files["P"], "--target", files["Q"]],
        ["risk", "--data", files["reg"], "--theta", "0.5,0.5", "--delta", "0.1", "--a", "4"],
        ["risk", "--data", files["ret"], "--theta", "0.5,0.5", "--delta", "0.1", "--loss", "variance"],
        ["fit", "--data", files["ret"], "--loss", "portfolio", "--delta", "0.0001", "--target-return", "0.0"],
        ["profile", "--data", files["reg"], "--theta", "0.4,0.4", "--model", "regression"],
        ["radius", "--data", files["reg"], "--alpha", "0.1", "--k", "2000"],
        ["region", "--data", files["reg"], "--alpha", "0.1", "--k", "30"],
        ["test-fairness", "--data", files["fair"], "--theta", "1,0.5"],
        ["simulate", "scatter", "--config", files["cfg"]],
        ["simulate", "infsup", "--config", files["inf"]],
        ["bound", "--M", "1", "--L", "1", "--diam", "1", "--dudley-c", "1", "--delta", "0.1",
         "--eps", "0.05", "--n", "100"],
    ]
    for c in cmds:
        code, out, err = _run(c)
        assert code == 0, (c, out, err)
        rep = json.loads(out)
        assert rep["command"] == c[0] and "outputs" in rep and "wallTime" not in rep
    rep = json.loads(_run(cmds[0])[1])
    assert rep["outputs"]["cost"] == pytest.approx(9.0)


def test_timing_flag(files):
    rep = json.loads(_run(["ot", "--source", files["P"], "--target", files["Q"], "--timing"])[1])
    assert rep["wallTime"] >= 0


def test_scatter_csv(files, tmp_path):
    path = tmp_path / "rows.csv"
    assert _run(["simulate", "scatter", "--config", files["cfg"], "--csv", str(path)])[0] == 0
    assert len(path.read_text().strip().splitlines()) == 9


def test_console_script_byte_identical_across_threads(files):
    argv = ["region", "--data", files["reg"], "--alpha", "0.1", "--seed", "3", "--k", "50"]
    outs = []
    for t in ("1", "3"):
        env = dict(os.environ, WDRO_THREADS=t)
        outs.append(subprocess.run([sys.executable, "-m", "wdro.cli", *argv], env=env,
                                   capture_output=True, check=True).stdout)
    assert outs[0] == outs[1]
