import csv
import json
from pathlib import Path

import numpy as np
import pytest

import madsnmpc
from madsnmpc.cli import ConfigError, HISTORY_COLUMNS, load_config, main, resolve_config

CONFIGS = Path(madsnmpc.__file__).parent / "configs"

DISK_TOML = """
output_dir = "{out}"

[problem]
kind = "disk"
start = [-3.0, -3.0]

[solver]
seed = 1
workers = {workers}
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_shipped_configs_resolve():
    for name in ("rocket.toml", "quadratic.toml", "tracking.toml"):
        cfg = load_config(CONFIGS / name)
        assert cfg["solver"]["tau"] == 0.5
        # the echoed configuration is itself a valid configuration
        assert resolve_config(json.loads(json.dumps(cfg))) == cfg


def test_unknown_key_is_reported_with_its_path():
    with pytest.raises(ConfigError, match="problem.foo: unknown key"):
        resolve_config({"problem": {"kind": "sphere", "dimension": 2, "foo": 1}})
    with pytest.raises(ConfigError, match="solver.tau"):
        resolve_config({"problem": {"kind": "sphere", "dimension": 2}, "solver": {"tau": 1.5}})
    with pytest.raises(ConfigError, match="solver.search"):
        resolve_config({"problem": {"kind": "sphere", "dimension": 2}, "solver": {"search": "lhs"}})
    with pytest.raises(ConfigError):
        resolve_config({"problem": {"kind": "nope"}})


def test_invalid_tau_exits_with_error(tmp_path, capsys):
    cfg = write(tmp_path, "bad.toml", '[problem]\nkind = "sphere"\ndimension = 2\n[solver]\ntau = 1.5\n')
    code, _, err = run(capsys, "solve", cfg, "--out", tmp_path / "o")
    assert code == 1 and "tau" in err


def test_quadratic_solves_to_frame_tolerance(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", CONFIGS / "quadratic.toml", "--out", tmp_path)
    assert code == 0
    summary = json.loads(out)
    assert summary["termination_reason"] == "frame_tolerance" and summary["F"] < 1e-8
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["best_feasible"]["F"] == summary["F"]
    assert report["config"]["problem"]["kind"] == "sphere"


def test_budget_exit_code(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", CONFIGS / "quadratic.toml", "--out", tmp_path, "--max-evals", "20")
    assert code == 2 and json.loads(out)["termination_reason"] == "max_evaluations"


def test_history_schema(tmp_path, capsys):
    cfg = write(tmp_path, "disk.toml", DISK_TOML.format(out=tmp_path / "o", workers=1))
    assert run(capsys, "solve", cfg)[0] == 0
    header, rows = read_csv(tmp_path / "o" / "history.csv")
    assert header == HISTORY_COLUMNS
    ks = [int(r[0]) for r in rows]
    assert ks == list(range(len(rows)))
    for r in rows:
        frame, mesh = float(r[1]), float(r[2])
        assert mesh == min(frame, frame * frame)
        assert r[7] in ("dominating", "improving", "unsuccessful")


def test_solve_is_byte_deterministic_and_parallel_matches(tmp_path, capsys):
    outs = []
    for i, workers in enumerate((1, 1, 4)):
        cfg = write(tmp_path, f"d{i}.toml", DISK_TOML.format(out=tmp_path / f"o{i}", workers=workers))
        assert run(capsys, "solve", cfg)[0] == 0
        outs.append((tmp_path / f"o{i}" / "history.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_json_config_is_accepted(tmp_path, capsys):
    raw = {"output_dir": str(tmp_path / "o"), "problem": {"kind": "l1", "dimension": 2, "start": [0.7, -0.3]}}
    cfg = write(tmp_path, "l1.json", json.dumps(raw))
    code, out, _ = run(capsys, "solve", cfg)
    assert code == 0 and json.loads(out)["F"] < 1e-4


def rocket_run(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", CONFIGS / "rocket.toml", "--out", tmp_path, "--max-evals", "400")
    assert code == 2
    report = json.loads((tmp_path / "report.json").read_text())
    for name in ("lower_trajectory.csv", "upper_trajectory.csv", "throttle.csv"):
        assert name in report["files"] and (tmp_path / name).exists()
    header, rows = read_csv(tmp_path / "lower_trajectory.csv")
    assert header == ["t", "x1", "x2", "x3", "u1", "l", "v1"]
    t = np.array([float(r[0]) for r in rows])
    assert np.all(np.diff(t) > 0)
    # the Lagrange column is identically zero for a pure terminal cost
    assert all(float(r[5]) == 0.0 for r in rows)
    header, rows = read_csv(tmp_path / "throttle.csv")
    assert header == ["segment", "t_start", "t_end", "thrust"] and len(rows) == 5
    best = report["best_feasible"] or report["best_infeasible"]
    np.testing.assert_array_equal([float(r[3]) for r in rows], best["point"][:5])
    return best


def test_rocket_solve_writes_trajectories_and_throttle(tmp_path, capsys):
    rocket_run(tmp_path, capsys)


def test_simulate_round_trip(tmp_path, capsys):
    best = rocket_run(tmp_path, capsys)
    point = ",".join(repr(x) for x in best["point"])
    code, out, _ = run(capsys, "simulate", CONFIGS / "rocket.toml", "--out", tmp_path / "sim", "--point", point)
    assert code == 0
    line = json.loads(out)
    assert line["F"] == best["F"] and line["H"] == best.get("H", 0.0)


def test_simulate_zero_thrust(tmp_path, capsys):
    point = ",".join(["0"] * 5 + ["1", "2", "3", "4"])
    code, out, _ = run(capsys, "simulate", CONFIGS / "rocket.toml", "--out", tmp_path, "--point", point)
    line = json.loads(out)
    assert code == 0 and line["F"] == 3048.0 and line["apogee"] == [0.0, 0.0]
    assert line["late_switches"] == [4, 4]


def test_simulate_rejections(tmp_path, capsys):
    point = ",".join(["2500", "0", "0", "0", "0", "3", "2", "4", "5"])
    code, out, err = run(capsys, "simulate", CONFIGS / "rocket.toml", "--out", tmp_path, "--point", point)
    assert code == 1 and out == "" and "extremal barrier rejected" in err
    code, _, err = run(capsys, "simulate", CONFIGS / "rocket.toml", "--out", tmp_path, "--point", "1,2,3")
    assert code == 1 and "--point" in err
    code, _, err = run(capsys, "simulate", CONFIGS / "rocket.toml", "--out", tmp_path, "--point", "1,x")
    assert code == 1


def test_tracking_problem_simulate(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", CONFIGS / "tracking.toml", "--out", tmp_path, "--point", ",".join(["0"] * 8))
    assert code == 0
    line = json.loads(out)
    assert line["H"] == 0.0 and line["v_b"] == 0.0
    # x stays at 0, so the cost is the tracking integral of 1 over the horizon
    assert abs(line["F"] - 2.0) < 1e-6
    header, _ = read_csv(tmp_path / "best_trajectory.csv")
    assert header == ["t", "x1", "u1", "l", "v1"]
