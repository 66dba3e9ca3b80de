"""Robust apogee targeting for a throttled sounding rocket.

The rocket state is ``(h, v, m)``: altitude [m], vertical velocity [m/s] and
mass [kg]. With drag coefficient ``C_D`` and effective exhaust velocity
``v_e`` (``m_dot = -T / v_e``)::

    h_dot = v
    v_dot = (T - 0.5 * C_D * rho(h) * (pi d^2 / 4) * v * |v|) / m - g(h)
    m_dot = -T / v_e

The system is monotone in throttle and parameters, so every realization lies
between a *lower* trajectory (high drag, low exhaust velocity) and an *upper*
trajectory (low drag, high exhaust velocity). One throttle schedule drives
both; each ends at its own apogee. The robust problem minimizes the larger
apogee miss of the two subject to a velocity limit and a terminal mass floor.

Exhaust velocity is in m/s. A specific impulse quoted in seconds converts
with :func:`exhaust_velocity_from_isp`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .integrator import IntegrationConfig, TrajectoryRecord
from .mads import Evaluation, ExtremalBarrier
from .ocp import (
    CandidateEvaluation,
    EventHorizon,
    OcpProblem,
    PiecewiseConstantSwitching,
    evaluate_candidate,
)

SEA_LEVEL_DENSITY = 1.225
SCALE_HEIGHT = 8500.0
STANDARD_GRAVITY = 9.80665
EARTH_RADIUS = 6.371e6


def atmosphere(h: float) -> tuple[float, float]:
    """Exponential air density [kg/m^3] and inverse-square gravity [m/s^2]."""
    rho = SEA_LEVEL_DENSITY * math.exp(-h / SCALE_HEIGHT)
    r = EARTH_RADIUS / (EARTH_RADIUS + h)
    return rho, STANDARD_GRAVITY * r * r


def exhaust_velocity_from_isp(isp_seconds: float) -> float:
    return isp_seconds * STANDARD_GRAVITY


def rocket_rhs(state, thrust: float, drag_coefficient: float, exhaust_velocity: float, diameter: float) -> np.ndarray:
    h, v, m = float(state[0]), float(state[1]), float(state[2])
    if not m > 0.0:
        raise ValueError(f"non-positive rocket mass {m!r}")
    rho, g = atmosphere(h)
    area = math.pi * diameter * diameter / 4.0
    drag = 0.5 * drag_coefficient * rho * area * v * abs(v)
    return np.array([v, (thrust - drag) / m - g, -thrust / exhaust_velocity])


@dataclass(frozen=True)
class RocketParams:
    """Physical data; ``isp_bounds`` are effective exhaust velocities in m/s."""

    diameter: float = 0.155
    drag_bounds: tuple[float, float] = (0.45, 0.60)
    isp_bounds: tuple[float, float] = (1500.0, 1700.0)
    max_thrust: float = 2500.0
    initial_mass: float = 33.5
    dry_mass_min: float = 26.0
    target_altitude: float = 3048.0
    velocity_limit: float = 150.0
    switch_time_max: float = 40.0
    t_max: float = 120.0

    def __post_init__(self):
        object.__setattr__(self, "drag_bounds", tuple(float(x) for x in self.drag_bounds))
        object.__setattr__(self, "isp_bounds", tuple(float(x) for x in self.isp_bounds))
        if not 0 <= self.drag_bounds[0] <= self.drag_bounds[1]:
            raise ValueError("drag_bounds must satisfy 0 <= lower <= upper")
        if not 0 < self.isp_bounds[0] <= self.isp_bounds[1]:
            raise ValueError("isp_bounds must satisfy 0 < lower <= upper")
        if not self.max_thrust > 0:
            raise ValueError("max_thrust must be positive")
        if not self.initial_mass > self.dry_mass_min > 0:
            raise ValueError("require initial_mass > dry_mass_min > 0")
        if not self.diameter > 0:
            raise ValueError("diameter must be positive")
        if not self.t_max > self.switch_time_max > 0:
            raise ValueError("require t_max > switch_time_max > 0")

    @property
    def lower_case(self) -> tuple[float, float]:
        """``(C_D, v_e)`` of the lower (worst-case) trajectory."""
        return self.drag_bounds[1], self.isp_bounds[0]

    @property
    def upper_case(self) -> tuple[float, float]:
        return self.drag_bounds[0], self.isp_bounds[1]

    @property
    def initial_state(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.initial_mass])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drag_bounds"] = list(self.drag_bounds)
        d["isp_bounds"] = list(self.isp_bounds)
        return d


# integrator settings shared by both backends
ROCKET_INTEGRATION = IntegrationConfig(abs_tol=1e-8, rel_tol=1e-8, initial_step=1e-2, max_step=5.0, min_step=1e-10)


@dataclass
class ThrottleSchedule:
    levels: np.ndarray
    switch_times: np.ndarray

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float).reshape(-1)
        self.switch_times = np.asarray(self.switch_times, dtype=float).reshape(-1)
        if len(self.switch_times) != len(self.levels) - 1:
            raise ValueError("need exactly one switching time fewer than levels")

    @classmethod
    def from_vector(cls, c, n_segments: int) -> "ThrottleSchedule":
        c = np.asarray(c, dtype=float)
        if c.shape != (2 * n_segments - 1,):
            raise ValueError(f"expected {2 * n_segments - 1} decision values, got {c.size}")
        return cls(c[:n_segments], c[n_segments:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.levels, self.switch_times])

    def is_admissible(self, params: RocketParams) -> bool:
        lv, sw = self.levels, self.switch_times
        return bool(
            np.all(np.isfinite(lv))
            and np.all(np.isfinite(sw))
            and np.all((0.0 <= lv) & (lv <= params.max_thrust))
            and np.all((0.0 <= sw) & (sw <= params.switch_time_max))
            and np.all(np.diff(sw) >= 0.0)
        )

    def segments(self, t_end: float) -> list[tuple[float, float, float]]:
        """``(start, end, thrust)`` for every segment of positive length before ``t_end``."""
        edges = [0.0] + [float(s) for s in self.switch_times] + [t_end]
        out = []
        for i, level in enumerate(self.levels):
            a, b = min(edges[i], t_end), min(edges[i + 1], t_end)
            if b > a:
                out.append((a, b, float(level)))
        return out


@dataclass
class TrajectoryEnd:
    """Terminal summary of one tube member."""

    t_final: float
    altitude: float
    velocity: float
    mass: float
    velocity_violation: float
    ok: bool = True
    message: str = ""

    @classmethod
    def failed(cls, message: str) -> "TrajectoryEnd":
        nan = math.nan
        return cls(nan, nan, nan, nan, math.inf, False, message)


@dataclass
class TubeTrajectoryPair:
    lower: TrajectoryEnd
    upper: TrajectoryEnd
    lower_record: TrajectoryRecord | None = None
    upper_record: TrajectoryRecord | None = None
    lower_inputs: np.ndarray | None = None
    upper_inputs: np.ndarray | None = None

    @property
    def t_f_l(self) -> float:
        return self.lower.t_final

    @property
    def t_f_u(self) -> float:
        return self.upper.t_final

    @property
    def ok(self) -> bool:
        return self.lower.ok and self.upper.ok


def _member_problem(params: RocketParams, drag_coefficient: float, exhaust_velocity: float) -> OcpProblem:
    d = params.diameter
    vlim = params.velocity_limit
    dry = params.dry_mass_min

    def dynamics(x, u, t):
        return rocket_rhs(x, u[0], drag_coefficient, exhaust_velocity, d)

    def cannot_lift(t, x, u):
        return x[1] <= 0.0 and dynamics(x, u, t)[1] <= 0.0

    return OcpProblem(
        state_dim=3,
        input_dim=1,
        dynamics=dynamics,
        initial_state=params.initial_state,
        horizon=EventHorizon(0.0, lambda t, x: x[1], "falling", params.t_max, cannot_lift),
        path_constraints=[lambda x, u, t: x[1] - vlim],
        boundary_conditions=[lambda x0, u0, t0, xf, uf, tf: max(0.0, dry - xf[2])],
    )


def _parameterization(params: RocketParams, n_segments: int) -> PiecewiseConstantSwitching:
    return PiecewiseConstantSwitching(
        n_segments, 1, level_bounds=(0.0, params.max_thrust), switch_bounds=(0.0, params.switch_time_max)
    )


def _python_member(schedule, params, drag, ve, config, record) -> tuple[TrajectoryEnd, CandidateEvaluation]:
    problem = _member_problem(params, drag, ve)
    param = _parameterization(params, len(schedule.levels))
    ce = evaluate_candidate(problem, param, schedule.to_vector(), config, keep_trajectory=True)
    if not math.isfinite(ce.violation):
        return TrajectoryEnd.failed(ce.message), ce
    z = ce.trajectory.terminal_state
    end = TrajectoryEnd(ce.trajectory.terminal_time, z[0], z[1], z[2], float(ce.path_violations[0]))
    return end, ce


def simulate_tube(
    schedule: ThrottleSchedule,
    params: RocketParams = RocketParams(),
    integ_config: IntegrationConfig = ROCKET_INTEGRATION,
    *,
    record: bool = False,
    backend: str | None = None,
) -> TubeTrajectoryPair:
    """Fly the lower and upper tube members to their apogees.

    ``backend`` selects ``"compiled"`` or ``"python"``; the default is the
    compiled kernel when it is importable. Recording trajectories always uses
    the Python path through :mod:`madsnmpc.ocp`.
    """
    if not schedule.is_admissible(params):
        raise ValueError("throttle schedule violates bounds or switching order")
    use = _backend.resolve(backend)
    if use == "compiled" and not record:
        ends = []
        for drag, ve in (params.lower_case, params.upper_case):
            status, tf, h, v, m, viol = _backend.kernel.fly(
                schedule.levels, schedule.switch_times, drag, ve, params.diameter,
                params.initial_mass, params.velocity_limit, params.t_max,
                integ_config.abs_tol, integ_config.rel_tol, integ_config.initial_step,
                integ_config.max_step, integ_config.min_step, integ_config.max_steps,
            )
            ends.append(TrajectoryEnd(tf, h, v, m, viol) if status == 0 else TrajectoryEnd.failed(_backend.STATUS[status]))
        return TubeTrajectoryPair(ends[0], ends[1])

    lower, ce_l = _python_member(schedule, params, *params.lower_case, integ_config, record)
    upper, ce_u = _python_member(schedule, params, *params.upper_case, integ_config, record)
    return TubeTrajectoryPair(lower, upper, ce_l.trajectory, ce_u.trajectory, ce_l.inputs, ce_u.inputs)


@dataclass
class RobustScore:
    cost: float
    violation: float
    terms: tuple[float, float, float, float]

    def evaluation(self) -> Evaluation:
        return Evaluation(self.cost, self.violation, self.terms)


def score_tube(pair: TubeTrajectoryPair, params: RocketParams) -> RobustScore:
    """Worst apogee miss and aggregated violation of a tube.

    The violation terms are, in order: lower and upper velocity-violation
    integrals, lower and upper terminal mass shortfalls. Each enters squared
    with unit weight.
    """
    if not pair.ok:
        return RobustScore(math.inf, math.inf, (math.inf,) * 4)
    target = params.target_altitude
    cost = max(abs(pair.upper.altitude - target), abs(target - pair.lower.altitude))
    terms = (
        pair.lower.velocity_violation,
        pair.upper.velocity_violation,
        max(0.0, params.dry_mass_min - pair.lower.mass),
        max(0.0, params.dry_mass_min - pair.upper.mass),
    )
    violation = (terms[2] ** 2 + terms[0] ** 2) + (terms[3] ** 2 + terms[1] ** 2)
    return RobustScore(float(cost), float(violation), terms)


@dataclass
class DecisionSpace:
    names: list[str]
    lower: np.ndarray
    upper: np.ndarray
    scale: np.ndarray
    start: np.ndarray


@dataclass
class RobustRocketProblem:
    """Blackbox for the robust min-max apogee problem.

    Decision vector: ``(T_1..T_N, sigma_1..sigma_{N-1})`` in newtons and
    seconds. Bounds and switching order are search-space membership.
    """

    params: RocketParams = field(default_factory=RocketParams)
    n_segments: int = 5
    integ_config: IntegrationConfig = ROCKET_INTEGRATION
    backend: str | None = None

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("n_segments must be at least 1")

    @property
    def dimension(self) -> int:
        return 2 * self.n_segments - 1

    def schedule(self, c) -> ThrottleSchedule:
        return ThrottleSchedule.from_vector(c, self.n_segments)

    def contains(self, c) -> bool:
        c = np.asarray(c, dtype=float)
        return c.shape == (self.dimension,) and self.schedule(c).is_admissible(self.params)

    def simulate(self, c, record: bool = False) -> TubeTrajectoryPair:
        return simulate_tube(self.schedule(c), self.params, self.integ_config, record=record, backend=self.backend)

    def score(self, c) -> RobustScore:
        return score_tube(self.simulate(c), self.params)

    def __call__(self, c) -> Evaluation:
        return self.score(c).evaluation()

    def blackbox(self) -> ExtremalBarrier:
        return ExtremalBarrier(self, self.contains)

    def space(self) -> DecisionSpace:
        n, p = self.n_segments, self.params
        names = [f"T{i + 1}" for i in range(n)] + [f"sigma{i + 1}" for i in range(n - 1)]
        lower = np.zeros(self.dimension)
        upper = np.concatenate([np.full(n, p.max_thrust), np.full(n - 1, p.switch_time_max)])
        scale = np.concatenate([np.full(n, p.max_thrust / 10.0), np.full(n - 1, p.switch_time_max / 10.0)])
        return DecisionSpace(names, lower, upper, scale, self.default_start())

    def full_thrust_candidate(self) -> np.ndarray:
        """Full thrust until the worst-case propellant is gone, then coast."""
        p = self.params
        burn = (p.initial_mass - p.dry_mass_min) * p.isp_bounds[0] / p.max_thrust
        burn = min(burn, p.switch_time_max)
        levels = np.zeros(self.n_segments)
        levels[0] = p.max_thrust
        return np.concatenate([levels, np.full(self.n_segments - 1, burn)])

    def default_start(self) -> np.ndarray:
        """A finite, typically infeasible, starting schedule."""
        p = self.params
        n = self.n_segments
        levels = np.full(n, 0.5 * p.max_thrust)
        levels[-1] = 0.0
        switches = np.linspace(1.0, 10.0, n - 1) if n > 1 else np.array([])
        return np.concatenate([levels, switches])


def build_robust_problem(
    params: RocketParams = RocketParams(),
    n_segments: int = 5,
    integ_config: IntegrationConfig = ROCKET_INTEGRATION,
    backend: str | None = None,
) -> tuple[ExtremalBarrier, DecisionSpace]:
    problem = RobustRocketProblem(params, n_segments, integ_config, backend)
    return problem.blackbox(), problem.space()
