"""Single-shooting evaluation of optimal-control problems for direct search.

A candidate decision vector is decoded into an input trajectory, the plant is
simulated together with a Lagrange accumulator ``l`` and one violation
accumulator per path constraint::

    d/dt [x, l, v] = [f(x, u, t), L(x, u, t), max(0, g(x, u, t))]

and the results are folded into a cost and a constraint violation::

    v_b = sum_i rho_b_i * |h_i(x0, u0, t0, xf, uf, tf)|
    H   = v_b**2 + sum_i rho_i * v_i(tf)**2
    F   = Phi(xf, uf, tf) + l(tf)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence, Union

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .integrator import (
    IntegrationConfig,
    IntegrationError,
    OdeSystem,
    TrajectoryRecord,
    integrate,
    integrate_to_event,
)
from .mads import Evaluation, extremal_wrap

InputFunction = Callable[[float, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# horizons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedHorizon:
    t0: float
    tf: float


@dataclass(frozen=True)
class DecisionHorizon:
    """Final time taken from the last coordinate of the decision vector.

    The input parameterization sees the remaining leading coordinates.
    """

    t0: float
    tf_lower: float
    tf_upper: float


@dataclass(frozen=True)
class EventHorizon:
    """Final time fixed by the first zero crossing of ``event(t, x)``.

    ``stays_put`` may flag an initial condition from which the trajectory
    terminates immediately (for example a rocket that cannot lift off).
    """

    t0: float
    event: Callable[[float, np.ndarray], float]
    direction: Literal["rising", "falling", "any"]
    t_max: float
    stays_put: Callable[[float, np.ndarray, np.ndarray], bool] | None = None


Horizon = Union[FixedHorizon, DecisionHorizon, EventHorizon]


# ---------------------------------------------------------------------------
# input parameterizations
# ---------------------------------------------------------------------------


class MembershipError(ValueError):
    """A decision vector lies outside the admissible search space."""


@dataclass
class DecodedInput:
    """Input trajectory ``u(t, x)`` plus the times where it jumps."""

    func: InputFunction
    discontinuities: list[float]

    def __call__(self, t: float, x: np.ndarray | None = None) -> np.ndarray:
        return self.func(t, x)


class InputParameterization:
    """Maps decision coordinates to an input trajectory.

    Subclasses set ``lower``/``upper`` bounds and implement :meth:`decode`.
    """

    n_inputs: int
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, point) -> bool:
        c = np.asarray(point, dtype=float)
        if c.shape != self.lower.shape or not np.all(np.isfinite(c)):
            return False
        return bool(np.all(c >= self.lower) and np.all(c <= self.upper))

    def decode(self, point, t0: float, tf: float) -> DecodedInput:
        raise NotImplementedError

    def _check(self, point) -> np.ndarray:
        c = np.asarray(point, dtype=float)
        if not self.contains(c):
            raise MembershipError(f"decision vector {c.tolist()} is outside the admissible set")
        return c


def _bounds(value, size: int) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (size,))
    return arr.copy()


class ZeroOrderHold(InputParameterization):
    """``n_samples`` equal-length hold intervals per input over the horizon.

    The decision vector is sample-major: ``c[k * n_inputs + j]`` is input ``j``
    on interval ``k``.
    """

    def __init__(self, n_samples: int, n_inputs: int = 1, lower=-np.inf, upper=np.inf):
        if n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        self.n_samples = n_samples
        self.n_inputs = n_inputs
        self.lower = _bounds(lower, n_samples * n_inputs)
        self.upper = _bounds(upper, n_samples * n_inputs)

    def decode(self, point, t0, tf):
        c = self._check(point)
        values = c.reshape(self.n_samples, self.n_inputs)
        width = (tf - t0) / self.n_samples
        edges = [t0 + k * width for k in range(1, self.n_samples)]
        # index against the same edges the integrator restarts at
        grid = np.array(edges)

        def u(t, x=None):
            return values[int(np.searchsorted(grid, t, side="right"))]

        return DecodedInput(u, edges)


class PiecewiseConstantSwitching(InputParameterization):
    """Piecewise-constant levels with free switching times.

    Layout: all ``n_segments * n_inputs`` levels first (segment-major), then
    the ``n_segments - 1`` switching times. Switching times must be ordered;
    that is checked by :meth:`contains`, so misordered points are rejected
    before any simulation. The final segment is held to the end of the horizon.
    """

    def __init__(self, n_segments: int, n_inputs: int = 1, level_bounds=(-np.inf, np.inf), switch_bounds=(0.0, np.inf)):
        if n_segments < 1:
            raise ValueError("n_segments must be at least 1")
        self.n_segments = n_segments
        self.n_inputs = n_inputs
        n_levels = n_segments * n_inputs
        self.lower = np.concatenate(
            [_bounds(level_bounds[0], n_levels), _bounds(switch_bounds[0], n_segments - 1)]
        )
        self.upper = np.concatenate(
            [_bounds(level_bounds[1], n_levels), _bounds(switch_bounds[1], n_segments - 1)]
        )

    def split(self, point) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(point, dtype=float)
        n_levels = self.n_segments * self.n_inputs
        return c[:n_levels].reshape(self.n_segments, self.n_inputs), c[n_levels:]

    def contains(self, point) -> bool:
        if not super().contains(point):
            return False
        _, switches = self.split(point)
        return bool(np.all(np.diff(switches) >= 0.0))

    def decode(self, point, t0, tf):
        c = self._check(point)
        levels, switches = self.split(c)
        times = t0 + switches

        def u(t, x=None):
            return levels[int(np.searchsorted(times, t, side="right"))]

        inside = [float(s) for s in times if t0 < s < tf]
        return DecodedInput(u, sorted(set(inside)))


class InterpolatedPolynomial(InputParameterization):
    """A single interpolating polynomial per input through ``n_knots`` values.

    Knots sit on Chebyshev points of the horizon by default, which keeps the
    interpolant well conditioned for moderate ``n_knots``.
    """

    def __init__(self, n_knots: int, n_inputs: int = 1, lower=-np.inf, upper=np.inf, nodes: str = "chebyshev"):
        if n_knots < 1:
            raise ValueError("n_knots must be at least 1")
        if nodes not in ("chebyshev", "uniform"):
            raise ValueError(f"unknown node family {nodes!r}")
        self.n_knots = n_knots
        self.n_inputs = n_inputs
        self.nodes = nodes
        self.lower = _bounds(lower, n_knots * n_inputs)
        self.upper = _bounds(upper, n_knots * n_inputs)

    def knot_times(self, t0: float, tf: float) -> np.ndarray:
        if self.n_knots == 1:
            return np.array([0.5 * (t0 + tf)])
        if self.nodes == "uniform":
            return np.linspace(t0, tf, self.n_knots)
        k = np.arange(self.n_knots)
        return 0.5 * (t0 + tf) - 0.5 * (tf - t0) * np.cos(np.pi * k / (self.n_knots - 1))

    def decode(self, point, t0, tf):
        c = self._check(point)
        values = c.reshape(self.n_knots, self.n_inputs)
        if self.n_knots == 1:
            return DecodedInput(lambda t, x=None: values[0], [])
        interp = BarycentricInterpolator(self.knot_times(t0, tf), values)
        return DecodedInput(lambda t, x=None: np.atleast_1d(interp(t)), [])


class FeedbackPolicyAdapter(InputParameterization):
    """Wraps a user policy family ``policy_factory(params) -> u(t, x)``.

    No policy ships with the package; this only fixes the interface.
    """

    def __init__(self, policy_factory: Callable[[np.ndarray], InputFunction], n_inputs: int, lower, upper):
        self.policy_factory = policy_factory
        self.n_inputs = n_inputs
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)

    def decode(self, point, t0, tf):
        policy = self.policy_factory(self._check(point))
        return DecodedInput(lambda t, x=None: np.atleast_1d(policy(t, x)), [])


def decode_input(point, param: InputParameterization, t0: float, tf: float) -> DecodedInput:
    return param.decode(point, t0, tf)


# ---------------------------------------------------------------------------
# problem, augmentation and evaluation
# ---------------------------------------------------------------------------


@dataclass
class OcpProblem:
    """Explicit-form optimal control problem on one horizon.

    ``path_constraints`` are violated when positive; ``boundary_conditions``
    are satisfied when zero and receive
    ``(x0, u0, t0, xf, uf, tf)``.
    """

    state_dim: int
    input_dim: int
    dynamics: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    initial_state: np.ndarray
    horizon: Horizon
    lagrange: Callable[[np.ndarray, np.ndarray, float], float] | None = None
    mayer: Callable[[np.ndarray, np.ndarray, float], float] | None = None
    path_constraints: Sequence[Callable[[np.ndarray, np.ndarray, float], float]] = ()
    boundary_conditions: Sequence[Callable[..., float]] = ()
    path_weights: Sequence[float] | None = None
    boundary_weights: Sequence[float] | None = None

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float)
        if self.initial_state.shape != (self.state_dim,):
            raise ValueError("initial_state does not match state_dim")
        self.path_constraints = tuple(self.path_constraints)
        self.boundary_conditions = tuple(self.boundary_conditions)
        if self.path_weights is None:
            self.path_weights = np.ones(len(self.path_constraints))
        if self.boundary_weights is None:
            self.boundary_weights = np.ones(len(self.boundary_conditions))
        self.path_weights = np.asarray(self.path_weights, dtype=float)
        self.boundary_weights = np.asarray(self.boundary_weights, dtype=float)
        if len(self.path_weights) != len(self.path_constraints):
            raise ValueError("path_weights length must match path_constraints")
        if len(self.boundary_weights) != len(self.boundary_conditions):
            raise ValueError("boundary_weights length must match boundary_conditions")
        if np.any(self.path_weights < 0) or np.any(self.boundary_weights < 0):
            raise ValueError("constraint weights must be nonnegative")

    @property
    def n_path(self) -> int:
        return len(self.path_constraints)

    @property
    def augmented_dim(self) -> int:
        return self.state_dim + 1 + self.n_path

    def split_state(self, z: np.ndarray):
        """Split augmented state(s) into ``(x, l, v)`` along the last axis."""
        z = np.asarray(z)
        n = self.state_dim
        return z[..., :n], z[..., n], z[..., n + 1 :]


def _left_limited(u: DecodedInput, a: float, b: float) -> DecodedInput:
    """Input restricted to ``[a, b]`` that uses its left limit at ``b``.

    Only used for pieces ending at a jump, where the input is piecewise
    constant, so sampling slightly inside the piece recovers the held value.
    """
    inner = a + (b - a) * (1.0 - 1e-9)

    def func(t, x=None):
        return u.func(t if t < b else inner, x)

    return DecodedInput(func, [])


def augment(problem: OcpProblem, u: DecodedInput) -> OdeSystem:
    """Stack plant, Lagrange and violation dynamics into one ODE."""
    n = problem.state_dim
    lagrange = problem.lagrange
    constraints = problem.path_constraints
    dynamics = problem.dynamics
    out_dim = problem.augmented_dim

    def rhs(t, z):
        x = z[:n]
        ut = u(t, x)
        dz = np.empty(out_dim)
        dz[:n] = dynamics(x, ut, t)
        dz[n] = lagrange(x, ut, t) if lagrange is not None else 0.0
        for i, g in enumerate(constraints):
            dz[n + 1 + i] = max(0.0, g(x, ut, t))
        return dz

    return OdeSystem(out_dim, rhs)


def boundary_violation(problem: OcpProblem, x0, u0, t0, xf, uf, tf) -> float:
    total = 0.0
    for weight, h in zip(problem.boundary_weights, problem.boundary_conditions):
        total += weight * abs(h(x0, u0, t0, xf, uf, tf))
    return float(total)


def overall_violation(boundary: float, path_violations, path_weights) -> float:
    v = np.asarray(path_violations, dtype=float)
    return float(boundary**2 + np.sum(np.asarray(path_weights) * v**2))


@dataclass
class CandidateEvaluation:
    cost: float
    violation: float
    boundary_violation: float
    path_violations: np.ndarray
    trajectory: TrajectoryRecord | None = None
    inputs: np.ndarray | None = None
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0

    @classmethod
    def failure(cls, n_path: int, message: str) -> "CandidateEvaluation":
        return cls(math.inf, math.inf, math.inf, np.full(n_path, math.inf), message=message)


def split_decision(problem: OcpProblem, point) -> tuple[np.ndarray, float, float]:
    """Return ``(input coordinates, t0, tf)`` for a decision vector."""
    c = np.asarray(point, dtype=float)
    hz = problem.horizon
    if isinstance(hz, FixedHorizon):
        return c, hz.t0, hz.tf
    if isinstance(hz, DecisionHorizon):
        return c[:-1], hz.t0, float(c[-1])
    return c, hz.t0, hz.t_max


def membership(problem: OcpProblem, param: InputParameterization) -> Callable[[np.ndarray], bool]:
    """Search-space membership: parameter bounds, ordering and final-time bounds."""
    hz = problem.horizon

    def contains(point) -> bool:
        c = np.asarray(point, dtype=float)
        if isinstance(hz, DecisionHorizon):
            if c.ndim != 1 or c.size < 1:
                return False
            if not (hz.tf_lower <= c[-1] <= hz.tf_upper and c[-1] > hz.t0):
                return False
            c = c[:-1]
        return param.contains(c)

    return contains


def simulate(problem: OcpProblem, u: DecodedInput, t0: float, tf: float, config: IntegrationConfig) -> TrajectoryRecord:
    """Integrate the augmented system, restarting at every input jump."""
    z0 = np.concatenate([problem.initial_state, np.zeros(1 + problem.n_path)])
    hz = problem.horizon
    if isinstance(hz, EventHorizon) and hz.stays_put is not None:
        if hz.stays_put(t0, problem.initial_state, u(t0, problem.initial_state)):
            return TrajectoryRecord(np.array([t0]), z0[None, :], True)

    jumps = sorted(set(s for s in u.discontinuities if t0 < s < tf))
    edges = [t0] + jumps + [tf]
    pieces = []
    z = z0
    for a, b in zip(edges[:-1], edges[1:]):
        system = augment(problem, _left_limited(u, a, b) if b < tf else u)
        if isinstance(hz, EventHorizon):
            piece = integrate_to_event(system, z, a, hz.event, hz.direction, b, config)
        else:
            piece = integrate(system, z, a, b, config)
        pieces.append(piece)
        z = piece.terminal_state
        if piece.event_fired:
            break
    return TrajectoryRecord.concatenate(pieces)


def evaluate_candidate(
    problem: OcpProblem,
    param: InputParameterization,
    point,
    integ_config: IntegrationConfig = IntegrationConfig(),
    keep_trajectory: bool = True,
) -> CandidateEvaluation:
    """Decode, simulate and score one decision vector.

    Integration failures and non-finite results map to an infinite cost and
    violation instead of raising. Points outside ``param`` raise
    :class:`MembershipError`.
    """
    coords, t0, tf = split_decision(problem, point)
    if not tf > t0:
        raise MembershipError(f"empty horizon [{t0}, {tf}]")
    u = param.decode(coords, t0, tf)
    try:
        traj = simulate(problem, u, t0, tf, integ_config)
        if isinstance(problem.horizon, EventHorizon) and not traj.event_fired:
            raise IntegrationError(f"terminal event did not occur before t={tf}")
        x_all, l_all, v_all = problem.split_state(traj.states)
        x0, xf = x_all[0], x_all[-1]
        t_start, t_end = traj.times[0], traj.terminal_time
        u0, uf = u(t_start, x0), u(t_end, xf)
        vb = boundary_violation(problem, x0, u0, t_start, xf, uf, t_end)
        path_v = np.array(v_all[-1], dtype=float)
        violation = overall_violation(vb, path_v, problem.path_weights)
        mayer = problem.mayer(xf, uf, t_end) if problem.mayer is not None else 0.0
        cost = float(mayer + l_all[-1])
    except (IntegrationError, ArithmeticError, ValueError) as exc:
        return CandidateEvaluation.failure(problem.n_path, str(exc))
    if not (math.isfinite(cost) and math.isfinite(violation)):
        return CandidateEvaluation.failure(problem.n_path, "non-finite cost or violation")
    inputs = None
    if keep_trajectory:
        inputs = np.array([np.atleast_1d(u(t, x)) for t, x in zip(traj.times, x_all)], dtype=float)
    return CandidateEvaluation(
        cost, violation, vb, path_v, traj if keep_trajectory else None, inputs
    )


def as_blackbox(
    problem: OcpProblem,
    param: InputParameterization,
    integ_config: IntegrationConfig = IntegrationConfig(),
) -> Callable[[np.ndarray], Evaluation]:
    """Evaluator for :func:`madsnmpc.mads.solve`.

    Points outside the search space come back as ``(inf, inf)`` with no
    simulation. The internals carry ``(v_b, v_1(tf), ..., v_g(tf))``.
    """

    def evaluate(point) -> Evaluation:
        ce = evaluate_candidate(problem, param, point, integ_config, keep_trajectory=False)
        return Evaluation(ce.cost, ce.violation, (ce.boundary_violation, *ce.path_violations.tolist()))

    return extremal_wrap(evaluate, membership(problem, param))
