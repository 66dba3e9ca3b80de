"""Built-in test problems: analytic functions and a small tracking OCP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrator import IntegrationConfig
from .mads import Evaluation
from .ocp import FixedHorizon, OcpProblem, ZeroOrderHold, as_blackbox


@dataclass
class Sphere:
    """``f(c) = ||c - center||^2``."""

    center: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    def __call__(self, c) -> Evaluation:
        d = np.asarray(c, dtype=float) - self.center
        return Evaluation(float(d @ d))


@dataclass
class L1Norm:
    """``f(c) = ||c - center||_1``, nonsmooth at the minimizer."""

    center: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    def __call__(self, c) -> Evaluation:
        return Evaluation(float(np.sum(np.abs(np.asarray(c, dtype=float) - self.center))))


@dataclass
class DiskLinear:
    """``min sum(c)`` subject to ``||c||^2 <= radius_sq``.

    The violation is the squared hinge ``max(0, ||c||^2 - radius_sq)^2``. In
    two dimensions with ``radius_sq = 2`` the minimizer is ``(-1, -1)``.
    """

    radius_sq: float = 2.0

    def __call__(self, c) -> Evaluation:
        c = np.asarray(c, dtype=float)
        g = float(c @ c) - self.radius_sq
        return Evaluation(float(np.sum(c)), max(0.0, g) ** 2)


@dataclass
class TrackingOcp:
    """Single integrator ``x' = u`` tracking ``x = target`` under ``x <= cap``.

    Zero-order-hold input on ``[0, horizon]`` with ``n_samples`` intervals and
    ``|u| <= u_max``; running cost ``(x - target)^2 + effort * u^2``.
    """

    n_samples: int = 8
    horizon: float = 2.0
    target: float = 1.0
    cap: float = 0.8
    effort: float = 0.1
    u_max: float = 2.0
    problem: OcpProblem = field(init=False)
    parameterization: ZeroOrderHold = field(init=False)

    def __post_init__(self):
        target, cap, effort = self.target, self.cap, self.effort
        self.problem = OcpProblem(
            state_dim=1,
            input_dim=1,
            dynamics=lambda x, u, t: np.array([u[0]]),
            initial_state=np.zeros(1),
            horizon=FixedHorizon(0.0, self.horizon),
            lagrange=lambda x, u, t: (x[0] - target) ** 2 + effort * u[0] ** 2,
            path_constraints=[lambda x, u, t: x[0] - cap],
        )
        self.parameterization = ZeroOrderHold(self.n_samples, 1, -self.u_max, self.u_max)

    def blackbox(self, integ_config: IntegrationConfig = IntegrationConfig()):
        return as_blackbox(self.problem, self.parameterization, integ_config)

    def start(self) -> np.ndarray:
        return np.zeros(self.n_samples)
