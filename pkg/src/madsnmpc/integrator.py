"""Explicit Dormand-Prince 5(4) integration with terminal-event detection.

The integrator advances the augmented optimal-control dynamics (plant states,
Lagrange accumulator and violation accumulators) on one adaptive time grid.
Steps are accepted when the embedded error estimate satisfies, for every
component ``i``::

    |err_i| <= abs_tol + rel_tol * max(|y_i|, |y_new_i|)

Step sizes are adapted with a proportional-integral controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]
EventFunction = Callable[[float, np.ndarray], float]
Direction = Literal["rising", "falling", "any"]

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between the 5th and 4th order weights
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA
EVENT_REL_TOL = 1e-10


class IntegrationError(RuntimeError):
    """Raised when the step controller underflows or the step budget runs out."""


@dataclass(frozen=True)
class IntegrationConfig:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    initial_step: float = 1e-3
    max_step: float = 10.0
    min_step: float = 1e-12
    max_steps: int = 100_000

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "initial_step", "max_step", "min_step"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("require min_step <= initial_step <= max_step")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class OdeSystem:
    dimension: int
    rhs: Rhs


@dataclass
class TrajectoryRecord:
    """Accepted time grid and states of one integration run."""

    times: np.ndarray
    states: np.ndarray
    event_fired: bool = False

    @property
    def terminal_time(self) -> float:
        return float(self.times[-1])

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @classmethod
    def concatenate(cls, pieces: list["TrajectoryRecord"]) -> "TrajectoryRecord":
        """Join consecutive runs, dropping each duplicated restart point."""
        times = [pieces[0].times]
        states = [pieces[0].states]
        for piece in pieces[1:]:
            times.append(piece.times[1:])
            states.append(piece.states[1:])
        return cls(np.concatenate(times), np.concatenate(states), pieces[-1].event_fired)


def dopri_step(rhs: Rhs, t: float, y: np.ndarray, h: float, k1: np.ndarray):
    """One Dormand-Prince step. Returns ``(y5, f(t + h, y5), error_estimate)``."""
    k2 = rhs(t + C2 * h, y + h * (A21 * k1))
    k3 = rhs(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
    k4 = rhs(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
    k5 = rhs(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
    k6 = rhs(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
    y5 = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
    k7 = rhs(t + h, y5)
    err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
    return y5, k7, err


def _crossed(before: float, after: float, direction: Direction) -> bool:
    if direction == "rising":
        return before < 0.0 <= after
    if direction == "falling":
        return before > 0.0 >= after
    return before != 0.0 and before * after <= 0.0


def _error_ratio(err, y, y_new, config: IntegrationConfig) -> float:
    scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    ratio = float(np.max(np.abs(err) / scale))
    return ratio if math.isfinite(ratio) else math.inf


def _as_state(initial_state, dimension: int | None = None) -> np.ndarray:
    y = np.array(initial_state, dtype=float).reshape(-1)
    if dimension is not None and y.shape[0] != dimension:
        raise ValueError(f"initial state has {y.shape[0]} entries, system has {dimension}")
    return y


def _run(
    system: OdeSystem,
    initial_state,
    t0: float,
    t_end: float,
    config: IntegrationConfig,
    event: EventFunction | None,
    direction: Direction,
) -> TrajectoryRecord:
    if not t_end > t0:
        raise ValueError(f"integration end {t_end!r} must exceed start {t0!r}")
    rhs = system.rhs
    t = float(t0)
    y = _as_state(initial_state, system.dimension)
    k1 = np.asarray(rhs(t, y), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise IntegrationError(f"non-finite derivative at t={t}")

    times = [t]
    states = [y]
    g_prev = float(event(t, y)) if event is not None else 0.0
    h_ctrl = min(config.initial_step, config.max_step)
    err_prev = 1e-4
    rejected = False
    attempts = 0

    while t < t_end:
        attempts += 1
        if attempts > config.max_steps:
            raise IntegrationError(f"exceeded max_steps={config.max_steps} at t={t}")

        remaining = t_end - t
        last = False
        h = h_ctrl
        if h >= remaining:
            h, last = remaining, True
        elif remaining - h < config.min_step:
            h = 0.5 * remaining
            if h < config.min_step:
                h, last = remaining, True

        y_new, k7, err = dopri_step(rhs, t, y, h, k1)
        if np.all(np.isfinite(y_new)) and np.all(np.isfinite(k7)):
            ratio = _error_ratio(err, y, y_new, config)
        else:
            ratio = math.inf

        if ratio <= 1.0:
            t_new = t_end if last else t + h
            if event is not None:
                g_new = float(event(t_new, y_new))
                if _crossed(g_prev, g_new, direction):
                    t_hit, y_hit = _locate_event(rhs, t, y, k1, h, y_new, event, g_prev, direction)
                    times.append(t_hit)
                    states.append(y_hit)
                    return TrajectoryRecord(np.array(times), np.array(states), True)
                g_prev = g_new
            t, y, k1 = t_new, y_new, k7
            times.append(t)
            states.append(y)

            if ratio == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * ratio ** (-PI_ALPHA) * err_prev**PI_BETA
                fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            err_prev = max(ratio, 1e-4)
            h_ctrl = min(h * fac, config.max_step)
            rejected = False
        else:
            fac = FAC_MIN if not math.isfinite(ratio) else max(FAC_MIN, SAFETY * ratio ** (-0.2))
            h_ctrl = h * fac
            rejected = True
        if h_ctrl < config.min_step and t < t_end:
            raise IntegrationError(f"step size underflow (h={h_ctrl:.3e}) at t={t}")

    return TrajectoryRecord(np.array(times), np.array(states), False)


def _locate_event(rhs, t, y, k1, h, y_end, event, g_start, direction):
    """Bisect the accepted step ``[t, t + h]`` for the event crossing."""
    lo, hi, y_hi = 0.0, h, y_end
    tol = EVENT_REL_TOL * h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        y_mid, _, _ = dopri_step(rhs, t, y, mid, k1)
        if _crossed(g_start, float(event(t + mid, y_mid)), direction):
            hi, y_hi = mid, y_mid
        else:
            lo = mid
    return t + hi, y_hi


def integrate(
    system: OdeSystem,
    initial_state,
    t0: float,
    tf: float,
    config: IntegrationConfig = IntegrationConfig(),
) -> TrajectoryRecord:
    """Integrate ``system`` from ``t0`` to exactly ``tf``.

    Raises
    ------
    IntegrationError
        On step underflow below ``config.min_step`` or when more than
        ``config.max_steps`` steps are attempted.
    """
    return _run(system, initial_state, t0, tf, config, None, "any")


def integrate_to_event(
    system: OdeSystem,
    initial_state,
    t0: float,
    event: EventFunction,
    direction: Direction,
    t_max: float,
    config: IntegrationConfig = IntegrationConfig(),
) -> TrajectoryRecord:
    """Integrate until ``event`` crosses zero in ``direction`` or ``t_max`` is reached.

    The crossing is bracketed on the accepted step where the sign change was
    seen and refined by bisection to ``1e-10`` of that step. The reported
    terminal point lies on the far side of the crossing. Without a crossing
    the record ends at ``t_max`` with ``event_fired`` false.
    """
    if direction not in ("rising", "falling", "any"):
        raise ValueError(f"unknown event direction {direction!r}")
    return _run(system, initial_state, t0, t_max, config, event, direction)


def integrate_fixed_step(system: OdeSystem, initial_state, t0: float, tf: float, n_steps: int) -> TrajectoryRecord:
    """Propagate with the 5th-order solution on a uniform grid, no step control."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    y = _as_state(initial_state, system.dimension)
    h = (tf - t0) / n_steps
    times = t0 + h * np.arange(n_steps + 1)
    times[-1] = tf
    states = [y]
    k1 = np.asarray(system.rhs(t0, y), dtype=float)
    for i in range(n_steps):
        y, k1, _ = dopri_step(system.rhs, float(times[i]), y, h, k1)
        states.append(y)
    return TrajectoryRecord(times, np.array(states), False)
