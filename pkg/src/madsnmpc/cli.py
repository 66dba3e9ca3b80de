"""Command-line front end.

Usage::

    madsnmpc solve CONFIG [--out DIR] [--seed N] [--serial] [--max-evals N]
    madsnmpc simulate CONFIG --point v1,v2,... [--out DIR]

``CONFIG`` is a TOML file (JSON is accepted too) with the tables
``[problem]``, ``[solver]`` and ``[integrator]`` plus an optional top-level
``output_dir``. Unknown keys are errors.

Exit codes: 0 converged (frame tolerance), 2 evaluation or iteration budget
exhausted, 1 invalid configuration or fatal error.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .integrator import IntegrationConfig, TrajectoryRecord
from .mads import ConfigurationError, Evaluation, SolverConfig, SpeculativeSearch, TerminationReason, solve
from .ocp import InputParameterization, OcpProblem, as_blackbox, evaluate_candidate
from .problems import DiskLinear, L1Norm, Sphere, TrackingOcp
from .rocket import ROCKET_INTEGRATION, RobustRocketProblem, RocketParams

EXIT_OK, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2

HISTORY_COLUMNS = ["k", "delta_frame", "delta_mesh", "eta", "f_feas", "f_infeas", "h_infeas", "outcome"]


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

_NUMBER = (int, float)
_REQUIRED = object()

SOLVER_KEYS = {
    "initial_frame": (_NUMBER, 1.0),
    "tau": (_NUMBER, 0.5),
    "frame_tolerance": (_NUMBER, 1e-7),
    "max_evaluations": (int, None),
    "max_iterations": (int, None),
    "seed": (int, 0),
    "opportunistic": (bool, True),
    "barrier": (str, "progressive"),
    "search": (str, "none"),
    "workers": (int, 1),
}

_rocket_integration = {f.name: getattr(ROCKET_INTEGRATION, f.name) for f in fields(IntegrationConfig)}
INTEGRATOR_KEYS = {f.name: ((int,) if f.type in ("int", int) else _NUMBER, None) for f in fields(IntegrationConfig)}

ROCKET_PARAM_KEYS = {
    "diameter": _NUMBER,
    "drag_bounds": list,
    "isp_bounds": list,
    "max_thrust": _NUMBER,
    "initial_mass": _NUMBER,
    "dry_mass_min": _NUMBER,
    "target_altitude": _NUMBER,
    "velocity_limit": _NUMBER,
    "switch_time_max": _NUMBER,
    "t_max": _NUMBER,
}

PROBLEM_KEYS = {
    "rocket": {
        "n_segments": (int, 5),
        "start": ((str, list), "default"),
        "backend": (str, "auto"),
        "params": (dict, None),
    },
    "sphere": {"dimension": (int, 2), "center": ((list, *_NUMBER), 0.0), "start": (list, None)},
    "l1": {"dimension": (int, 2), "center": ((list, *_NUMBER), 0.0), "start": (list, None)},
    "disk": {"radius_sq": (_NUMBER, 2.0), "start": (list, [-3.0, -3.0])},
    "tracking": {
        "n_samples": (int, 8),
        "horizon": (_NUMBER, 2.0),
        "target": (_NUMBER, 1.0),
        "cap": (_NUMBER, 0.8),
        "effort": (_NUMBER, 0.1),
        "u_max": (_NUMBER, 2.0),
        "start": (list, None),
    },
    "external": {"factory": (str, _REQUIRED), "options": (dict, {})},
}


def _check_type(path: str, value, allowed):
    allowed = allowed if isinstance(allowed, tuple) else (allowed,)
    # bool is an int subclass; never accept it for numeric keys
    if isinstance(value, bool) and bool not in allowed:
        raise ConfigError(f"{path}: expected {'/'.join(t.__name__ for t in allowed)}, got bool")
    if not isinstance(value, allowed):
        raise ConfigError(f"{path}: expected {'/'.join(t.__name__ for t in allowed)}, got {type(value).__name__}")


def _resolve_table(path: str, given: dict, schema: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{path}: expected a table")
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    out = {}
    for key, (kind, default) in schema.items():
        if key in given:
            # JSON echoes carry explicit nulls for unset optional keys
            if not (given[key] is None and default is None):
                _check_type(f"{path}.{key}", given[key], kind)
            out[key] = given[key]
        elif default is _REQUIRED:
            raise ConfigError(f"{path}.{key}: required key is missing")
        else:
            out[key] = default
    return out


def resolve_config(raw: dict) -> dict:
    """Validate ``raw`` and fill in defaults. The result is itself a valid config."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a table at the top level")
    unknown = sorted(set(raw) - {"problem", "solver", "integrator", "output_dir"})
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "problem" not in raw:
        raise ConfigError("problem: required table is missing")

    problem_raw = dict(raw["problem"]) if isinstance(raw["problem"], dict) else raw["problem"]
    if not isinstance(problem_raw, dict):
        raise ConfigError("problem: expected a table")
    kind = problem_raw.pop("kind", None)
    if kind not in PROBLEM_KEYS:
        raise ConfigError(f"problem.kind: expected one of {sorted(PROBLEM_KEYS)}, got {kind!r}")
    problem = {"kind": kind, **_resolve_table("problem", problem_raw, PROBLEM_KEYS[kind])}
    if kind == "rocket":
        params = problem["params"] or {}
        unknown = sorted(set(params) - set(ROCKET_PARAM_KEYS))
        if unknown:
            raise ConfigError(f"problem.params.{unknown[0]}: unknown key")
        for key, value in params.items():
            _check_type(f"problem.params.{key}", value, ROCKET_PARAM_KEYS[key])
        try:
            problem["params"] = RocketParams(**params).to_dict()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"problem.params: {exc}") from None
        if problem["backend"] not in ("auto", "compiled", "python"):
            raise ConfigError(f"problem.backend: expected auto/compiled/python, got {problem['backend']!r}")
        if problem["n_segments"] < 1:
            raise ConfigError("problem.n_segments: must be at least 1")

    solver = _resolve_table("solver", raw.get("solver", {}), SOLVER_KEYS)
    if solver["seed"] < 0:
        raise ConfigError(f"solver.seed: must be a non-negative integer, got {solver['seed']!r}")
    if solver["search"] not in ("none", "speculative"):
        raise ConfigError(f"solver.search: expected 'none' or 'speculative', got {solver['search']!r}")
    try:
        make_solver_config(solver)
    except ConfigurationError as exc:
        key = next((k for k in SOLVER_KEYS if str(exc).startswith(k)), None)
        raise ConfigError(f"solver.{key}: {exc}" if key else f"solver: {exc}") from None

    integ = _resolve_table("integrator", raw.get("integrator", {}), INTEGRATOR_KEYS)
    base = _rocket_integration if kind == "rocket" else {f.name: getattr(IntegrationConfig(), f.name) for f in fields(IntegrationConfig)}
    integ = {k: (base[k] if v is None else v) for k, v in integ.items()}
    try:
        IntegrationConfig(**integ)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None

    output_dir = raw.get("output_dir", "madsnmpc-out")
    _check_type("output_dir", output_dir, str)
    return {"output_dir": output_dir, "problem": problem, "solver": solver, "integrator": integ}


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return resolve_config(raw)


def make_solver_config(solver: dict) -> SolverConfig:
    opts = dict(solver)
    opts["search"] = SpeculativeSearch() if opts["search"] == "speculative" else None
    opts["initial_frame"] = float(opts["initial_frame"])
    opts["tau"] = float(opts["tau"])
    opts["frame_tolerance"] = float(opts["frame_tolerance"])
    return SolverConfig(**opts)


# ---------------------------------------------------------------------------
# problem setup
# ---------------------------------------------------------------------------


@dataclass
class ProblemSetup:
    """Everything the CLI needs to solve, replay and export one problem.

    External factories may return one of these directly, or a tuple
    ``(OcpProblem, InputParameterization, start)``.
    """

    blackbox: Callable[[np.ndarray], Evaluation]
    start: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    scale: np.ndarray | None = None
    export: Callable[[np.ndarray, Path], list[str]] | None = None
    details: Callable[[np.ndarray], dict] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.start)


def _vector(path: str, value, size: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if size is not None and arr.shape not in ((size,), (1,)):
        raise ConfigError(f"{path}: expected {size} values, got {arr.size}")
    return np.broadcast_to(arr, (size,)).copy() if size is not None else arr


def _ocp_setup(problem: OcpProblem, param: InputParameterization, start, integ: IntegrationConfig) -> ProblemSetup:
    def export(point, out: Path):
        ce = evaluate_candidate(problem, param, point, integ, keep_trajectory=True)
        if ce.trajectory is None:
            return []
        write_trajectory_csv(out / "best_trajectory.csv", ce.trajectory, ce.inputs, problem.state_dim)
        return ["best_trajectory.csv"]

    def details(point):
        ce = evaluate_candidate(problem, param, point, integ, keep_trajectory=False)
        return {"v_b": ce.boundary_violation, "v": ce.path_violations.tolist()}

    return ProblemSetup(as_blackbox(problem, param, integ), np.asarray(start, dtype=float), export=export, details=details)


def _rocket_setup(cfg: dict, integ: IntegrationConfig) -> ProblemSetup:
    params = RocketParams(**cfg["params"])
    backend = None if cfg["backend"] == "auto" else cfg["backend"]
    rp = RobustRocketProblem(params, cfg["n_segments"], integ, backend)
    space = rp.space()
    start = cfg["start"]
    if isinstance(start, str):
        choices = {"default": rp.default_start, "full_thrust": rp.full_thrust_candidate}
        if start not in choices:
            raise ConfigError(f"problem.start: expected a vector, 'default' or 'full_thrust', got {start!r}")
        start = choices[start]()
    start = _vector("problem.start", start, rp.dimension)

    def export(point, out: Path):
        pair = rp.simulate(point, record=True)
        written = []
        for name, rec, inputs in (("lower", pair.lower_record, pair.lower_inputs), ("upper", pair.upper_record, pair.upper_inputs)):
            if rec is not None:
                write_trajectory_csv(out / f"{name}_trajectory.csv", rec, inputs, 3)
                written.append(f"{name}_trajectory.csv")
        write_throttle_csv(out / "throttle.csv", rp.schedule(point), max(pair.t_f_l, pair.t_f_u))
        written.append("throttle.csv")
        return written

    def details(point):
        pair = rp.simulate(point)
        score = rp.score(point)
        _, _, m_l, m_u = score.terms
        sigma = rp.schedule(point).switch_times
        return {
            "v_b": [m_l, m_u],
            "v": [[score.terms[0]], [score.terms[1]]],
            "apogee": [pair.lower.altitude, pair.upper.altitude],
            "t_f": [pair.t_f_l, pair.t_f_u],
            "terminal_velocity": [pair.lower.velocity, pair.upper.velocity],
            "terminal_mass": [pair.lower.mass, pair.upper.mass],
            # switching times after apogee never execute for that member
            "late_switches": [int(np.sum(sigma > pair.t_f_l)), int(np.sum(sigma > pair.t_f_u))],
        }

    return ProblemSetup(
        rp.blackbox(), start, space.lower, space.upper, space.scale, export, details,
        extra={"names": space.names},
    )


def build_setup(config: dict) -> ProblemSetup:
    cfg = config["problem"]
    integ = IntegrationConfig(**config["integrator"])
    kind = cfg["kind"]
    if kind == "rocket":
        return _rocket_setup(cfg, integ)
    if kind in ("sphere", "l1"):
        dim = cfg["dimension"]
        if dim < 1:
            raise ConfigError("problem.dimension: must be at least 1")
        center = _vector("problem.center", cfg["center"], dim)
        if cfg["start"] is None:
            start = np.random.default_rng(config["solver"]["seed"]).uniform(-2.0, 2.0, dim)
        else:
            start = _vector("problem.start", cfg["start"], dim)
        return ProblemSetup((Sphere if kind == "sphere" else L1Norm)(center), start)
    if kind == "disk":
        start = _vector("problem.start", cfg["start"])
        return ProblemSetup(DiskLinear(float(cfg["radius_sq"])), start)
    if kind == "tracking":
        opts = {k: v for k, v in cfg.items() if k not in ("kind", "start")}
        tr = TrackingOcp(**opts)
        start = tr.start() if cfg["start"] is None else _vector("problem.start", cfg["start"], tr.n_samples)
        setup = _ocp_setup(tr.problem, tr.parameterization, start, integ)
        setup.lower, setup.upper = tr.parameterization.lower, tr.parameterization.upper
        return setup
    return _external_setup(cfg, integ)


def _external_setup(cfg: dict, integ: IntegrationConfig) -> ProblemSetup:
    spec = cfg["factory"]
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ConfigError(f"problem.factory: expected 'module:callable', got {spec!r}")
    try:
        factory = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"problem.factory: cannot load {spec!r}: {exc}") from None
    made = factory(**cfg["options"])
    if isinstance(made, ProblemSetup):
        return made
    if isinstance(made, tuple) and len(made) == 3 and isinstance(made[0], OcpProblem):
        return _ocp_setup(made[0], made[1], made[2], integ)
    raise ConfigError("problem.factory: must return a ProblemSetup or (OcpProblem, parameterization, start)")


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_history_csv(path: Path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for rec in history:
            w.writerow(
                [
                    rec.k,
                    _fmt(rec.frame_size),
                    _fmt(rec.mesh_size),
                    _fmt(rec.eta),
                    _fmt(rec.f_feasible),
                    _fmt(rec.f_infeasible),
                    _fmt(rec.h_infeasible),
                    rec.outcome.value,
                ]
            )


def write_trajectory_csv(path: Path, record: TrajectoryRecord, inputs, state_dim: int):
    """Columns ``t, x1..xn, u1..um, l, v1..vg`` on the accepted time grid."""
    states = np.atleast_2d(record.states)
    inputs = np.zeros((len(record.times), 0)) if inputs is None else np.atleast_2d(inputs)
    n_v = states.shape[1] - state_dim - 1
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(state_dim)]
        + [f"u{i + 1}" for i in range(inputs.shape[1])]
        + ["l"]
        + [f"v{i + 1}" for i in range(n_v)]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, z, u in zip(record.times, states, inputs):
            row = [t, *z[:state_dim], *u, z[state_dim], *z[state_dim + 1 :]]
            w.writerow([_fmt(x) for x in row])


def write_throttle_csv(path: Path, schedule, t_end: float):
    """One row per throttle plateau: ``segment, t_start, t_end, thrust``."""
    edges = [0.0, *schedule.switch_times.tolist()]
    ends = [*schedule.switch_times.tolist(), max(t_end, edges[-1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment", "t_start", "t_end", "thrust"])
        for i, (a, b, level) in enumerate(zip(edges, ends, schedule.levels)):
            w.writerow([i + 1, _fmt(a), _fmt(b), _fmt(level)])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _apply_overrides(config: dict, args) -> dict:
    raw = json.loads(json.dumps(config))
    if args.out is not None:
        raw["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        raw["solver"]["seed"] = args.seed
    if getattr(args, "max_evals", None) is not None:
        raw["solver"]["max_evaluations"] = args.max_evals
    if getattr(args, "serial", False):
        raw["solver"]["workers"] = 1
    return resolve_config(raw)


def cmd_solve(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    setup = build_setup(config)
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)

    report = solve(
        setup.blackbox,
        setup.start,
        make_solver_config(config["solver"]),
        lower=setup.lower,
        upper=setup.upper,
        scale=setup.scale,
    )
    write_history_csv(out / "history.csv", report.history)
    bundle = report.to_dict()
    bundle["config"] = config
    files = ["report.json", "history.csv"]
    best = report.best
    if best is not None:
        if setup.details is not None:
            bundle["best_details"] = setup.details(best.point)
        if setup.export is not None:
            files += setup.export(best.point, out)
    bundle["files"] = files
    bundle["version"] = __version__
    with open(out / "report.json", "w") as fh:
        json.dump(bundle, fh, indent=2)
        fh.write("\n")

    summary = {"termination_reason": report.termination_reason.value, "evaluations": report.evaluations}
    if best is not None:
        summary.update(F=best.cost, H=best.violation)
    print(json.dumps(summary))
    if report.termination_reason is TerminationReason.FRAME_TOLERANCE:
        return EXIT_OK
    return EXIT_BUDGET


def parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(" ", "").split(",") if v != ""])
    except ValueError:
        raise ConfigError(f"--point: cannot parse {text!r} as comma-separated numbers") from None


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    setup = build_setup(config)
    point = parse_point(args.point)
    if point.shape != (setup.dimension,):
        raise ConfigError(f"--point: expected {setup.dimension} values, got {point.size}")
    contains = getattr(setup.blackbox, "contains", None)
    inside = contains(point) if contains is not None else True
    if inside and setup.lower is not None:
        inside = bool(np.all(point >= setup.lower) and np.all(point <= setup.upper))
    if not inside:
        print("extremal barrier rejected the candidate: it lies outside the search space (bounds or switching order)", file=sys.stderr)
        return EXIT_ERROR

    e = setup.blackbox(point)
    line = {"F": e.cost, "H": e.violation}
    if setup.details is not None:
        line.update(setup.details(point))
    else:
        line.update(v_b=None, v=[])
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if setup.export is not None:
        line["files"] = setup.export(point, out)
    print(json.dumps(line))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="madsnmpc", description="MADS solver for simulation-based optimal control.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="TOML or JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="solver seed (overrides solver.seed)")
        p.add_argument("--serial", action="store_true", help="evaluate serially (workers = 1)")
        p.add_argument("--max-evals", type=int, dest="max_evals", help="evaluation budget")

    p_solve = sub.add_parser("solve", help="run MADS on the configured problem")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="evaluate one decision vector")
    common(p_sim)
    p_sim.add_argument("--point", required=True, help="comma-separated decision vector")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"madsnmpc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, RuntimeError) as exc:
        print(f"madsnmpc: fatal: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
