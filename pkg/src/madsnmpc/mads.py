"""Mesh adaptive direct search (MADS) with extremal and progressive barriers.

Every evaluated point lies on a mesh of size ``delta = min(Delta, Delta**2)``
anchored at the incumbent it was generated from, inside a frame of size
``Delta``. Poll directions come from an integer Householder basis built from a
pseudorandom direction, so they become dense as the mesh shrinks faster than
the frame.

Two incumbents are tracked under the progressive barrier: the best feasible
point (violation exactly zero) and the best infeasible point whose violation
does not exceed the barrier threshold ``eta``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised for solver settings or starting points that cannot be used."""


class Outcome(str, enum.Enum):
    DOMINATING = "dominating"
    IMPROVING = "improving"
    UNSUCCESSFUL = "unsuccessful"


class TerminationReason(str, enum.Enum):
    FRAME_TOLERANCE = "frame_tolerance"
    MAX_EVALUATIONS = "max_evaluations"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class Evaluation:
    """Result of one blackbox call: cost ``F``, violation ``H`` and internals ``w``."""

    cost: float
    violation: float = 0.0
    internals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cost", float(self.cost))
        object.__setattr__(self, "violation", float(self.violation))
        object.__setattr__(self, "internals", tuple(float(w) for w in self.internals))
        if math.isnan(self.violation) or self.violation < 0:
            raise ValueError(f"violation must be >= 0 or +inf, got {self.violation!r}")
        if math.isnan(self.cost):
            object.__setattr__(self, "cost", math.inf)
            object.__setattr__(self, "violation", math.inf)

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0

    @property
    def rejected(self) -> bool:
        return math.isinf(self.violation)

    @classmethod
    def reject(cls) -> "Evaluation":
        return cls(math.inf, math.inf)


@dataclass(frozen=True)
class Incumbent:
    point: np.ndarray
    evaluation: Evaluation

    @property
    def cost(self) -> float:
        return self.evaluation.cost

    @property
    def violation(self) -> float:
        return self.evaluation.violation


# ---------------------------------------------------------------------------
# mesh and frame
# ---------------------------------------------------------------------------


def mesh_size_from_frame(frame_size: float) -> float:
    if not frame_size > 0:
        raise ValueError(f"frame size must be positive, got {frame_size!r}")
    return min(frame_size, frame_size * frame_size)


def _check_tau(tau: float):
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")


def update_frame(frame_size: float, outcome: Outcome | str, tau: float) -> float:
    _check_tau(tau)
    outcome = Outcome(outcome)
    if outcome is Outcome.DOMINATING:
        return frame_size / tau
    if outcome is Outcome.IMPROVING:
        return frame_size
    return frame_size * tau


@dataclass(frozen=True)
class MeshState:
    frame_size: float
    tau: float = 0.5
    iteration: int = 0
    mesh_size: float = field(init=False)

    def __post_init__(self):
        _check_tau(self.tau)
        object.__setattr__(self, "mesh_size", mesh_size_from_frame(self.frame_size))

    @property
    def ratio(self) -> int:
        """Largest integer ``r`` with ``r * mesh_size <= frame_size``."""
        return max(1, int(math.floor(self.frame_size / self.mesh_size * (1 + 1e-12))))

    def updated(self, outcome: Outcome | str) -> "MeshState":
        return MeshState(update_frame(self.frame_size, outcome, self.tau), self.tau, self.iteration + 1)


def frame_lattice(dimension: int, mesh: MeshState) -> np.ndarray:
    """All nonzero integer offsets ``z`` with ``||mesh_size * z||_inf <= frame_size``.

    These are the mesh points a poll step may reach around the center.
    """
    r = mesh.ratio
    axes = [np.arange(-r, r + 1)] * dimension
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dimension)
    return grid[np.any(grid != 0, axis=1)]


def generate_poll_directions(dimension: int, mesh: MeshState, rng: np.random.Generator | int) -> np.ndarray:
    """Return ``2 * dimension`` integer directions ``[B; -B]`` as rows.

    ``B`` is a rounded integer Householder basis built from a random direction
    ``q`` with ``||q||_inf = r``, where ``r`` is the frame-to-mesh ratio; each
    row has infinity norm ``r`` so poll points land on the frame boundary.
    With ``r == 1`` the coordinate directions are returned.
    """
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    r = mesh.ratio
    eye = np.eye(dimension, dtype=np.int64)
    if r == 1 or dimension == 1:
        basis = r * eye
        return np.vstack([basis, -basis])
    for _ in range(16):
        v = rng.standard_normal(dimension)
        q = np.round(r * v / np.max(np.abs(v)))
        householder = np.dot(q, q) * np.eye(dimension) - 2.0 * np.outer(q, q)
        basis = np.round(r * householder / np.max(np.abs(householder), axis=0)).T
        if np.linalg.matrix_rank(basis) == dimension:
            basis = basis.astype(np.int64)
            return np.vstack([basis, -basis])
    basis = r * eye
    return np.vstack([basis, -basis])


# ---------------------------------------------------------------------------
# dominance
# ---------------------------------------------------------------------------


def dominates_feasible(p: Evaluation, y: Evaluation) -> bool:
    if not (p.feasible and y.feasible):
        raise ValueError("feasible dominance needs two feasible evaluations")
    return p.cost < y.cost


def dominates_infeasible(p: Evaluation, y: Evaluation) -> bool:
    """``p`` is no worse in cost and violation than ``y`` and strictly better in one."""
    for e in (p, y):
        if e.feasible or math.isinf(e.violation):
            raise ValueError("infeasible dominance needs finite positive violations")
    no_worse = p.cost <= y.cost and p.violation <= y.violation
    return no_worse and (p.cost < y.cost or p.violation < y.violation)


# ---------------------------------------------------------------------------
# barrier bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierState:
    feasible: Incumbent | None = None
    infeasible: Incumbent | None = None
    eta: float = math.inf

    def __post_init__(self):
        if self.feasible is None and self.infeasible is None:
            raise ConfigurationError("at least one incumbent is required")
        if self.feasible is not None and not self.feasible.evaluation.feasible:
            raise ValueError("feasible incumbent has nonzero violation")
        if self.infeasible is not None:
            h = self.infeasible.violation
            if not (0 < h < math.inf):
                raise ValueError("infeasible incumbent needs a finite positive violation")

    @property
    def threshold(self) -> float:
        """Violation bound a point must beat to count as improving."""
        if self.infeasible is None:
            return self.eta
        return min(self.eta, self.infeasible.violation)

    def incumbents(self) -> list[Incumbent]:
        return [inc for inc in (self.feasible, self.infeasible) if inc is not None]


def _sort_key(point: np.ndarray, e: Evaluation):
    return (e.cost, tuple(point.tolist()))


def _classify(barrier: BarrierState, points, evals, opportunistic: bool):
    """Fold evaluated points into the barrier. Returns ``(outcome | None, barrier, scanned)``.

    ``None`` means no dominating or improving point was seen. ``scanned`` is
    the number of leading points that were consumed (opportunistic mode stops
    at the first dominating point).
    """
    best_f: tuple | None = None
    best_i: tuple | None = None
    improving: list[tuple] = []
    threshold = barrier.threshold
    scanned = 0
    for p, e in zip(points, evals):
        scanned += 1
        if e.feasible:
            if barrier.feasible is None or dominates_feasible(e, barrier.feasible.evaluation):
                if best_f is None or _sort_key(p, e) < _sort_key(*best_f):
                    best_f = (p, e)
        elif not e.rejected:
            if barrier.infeasible is not None and dominates_infeasible(e, barrier.infeasible.evaluation):
                if best_i is None or _sort_key(p, e) < _sort_key(*best_i):
                    best_i = (p, e)
            elif e.violation < threshold:
                improving.append((p, e))
        if opportunistic and (best_f is not None or best_i is not None):
            break

    if best_f is not None or best_i is not None:
        feasible, infeasible, eta = barrier.feasible, barrier.infeasible, barrier.eta
        if best_f is not None:
            feasible = Incumbent(*best_f)
        if best_i is not None:
            infeasible = Incumbent(*best_i)
            eta = best_i[1].violation
        return Outcome.DOMINATING, BarrierState(feasible, infeasible, eta), scanned
    if improving:
        p, e = min(improving, key=lambda pe: (-pe[1].violation, pe[1].cost, tuple(pe[0].tolist())))
        return Outcome.IMPROVING, BarrierState(barrier.feasible, Incumbent(p, e), e.violation), scanned
    return None, barrier, scanned


# ---------------------------------------------------------------------------
# evaluation plumbing
# ---------------------------------------------------------------------------

Blackbox = Callable[[np.ndarray], Evaluation]


class ExtremalBarrier:
    """Blackbox wrapper that rejects points outside a search-space set.

    Rejected points return ``(inf, inf)`` and never reach the inner evaluator.
    Membership is closed: boundary points pass.
    """

    def __init__(self, inner: Blackbox, membership: Callable[[np.ndarray], bool]):
        self.inner = inner
        self.membership = membership
        self.inner_calls = 0

    def contains(self, point) -> bool:
        return bool(self.membership(np.asarray(point, dtype=float)))

    def __call__(self, point) -> Evaluation:
        point = np.asarray(point, dtype=float)
        if not self.contains(point):
            return Evaluation.reject()
        self.inner_calls += 1
        return self.inner(point)


def extremal_wrap(evaluator: Blackbox, membership: Callable[[np.ndarray], bool]) -> ExtremalBarrier:
    return ExtremalBarrier(evaluator, membership)


def box_membership(lower, upper) -> Callable[[np.ndarray], bool]:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    def contains(point) -> bool:
        return bool(np.all(point >= lower) and np.all(point <= upper))

    return contains


class _Evaluator:
    """Cache, budget and optional thread-parallel dispatch around a blackbox.

    Cache hits and points rejected by search-space membership are free; every
    other call counts toward the evaluation budget.
    """

    def __init__(self, blackbox, membership, barrier_mode: str, max_evaluations: int | None, workers: int):
        self.blackbox = blackbox
        self.membership = membership
        self.barrier_mode = barrier_mode
        self.max_evaluations = max_evaluations
        self.workers = workers
        self.count = 0
        self.exhausted = False
        self.cache: dict[tuple, Evaluation] = {}
        self._pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def _call(self, point: np.ndarray) -> Evaluation:
        try:
            e = self.blackbox(point)
            if not isinstance(e, Evaluation):
                e = Evaluation(*e) if isinstance(e, tuple) else Evaluation(float(e))
        except Exception:
            return Evaluation.reject()
        if self.barrier_mode == "extremal" and not e.feasible:
            return Evaluation.reject()
        return e

    def evaluate(self, points: Sequence[np.ndarray]) -> list[Evaluation]:
        """Evaluate ``points`` in order; the result is shorter only if the budget ran out."""
        results: list[Evaluation | None] = [None] * len(points)
        pending: list[int] = []
        for i, p in enumerate(points):
            key = tuple(p.tolist())
            if key in self.cache:
                results[i] = self.cache[key]
            elif self.membership is not None and not self.membership(p):
                results[i] = self.cache[key] = Evaluation.reject()
            else:
                if self.max_evaluations is not None and self.count + len(pending) >= self.max_evaluations:
                    self.exhausted = True
                    del results[i:]
                    break
                pending.append(i)
        todo = [points[i] for i in pending]
        if self._pool is not None and len(todo) > 1:
            values = list(self._pool.map(self._call, todo))
        else:
            values = [self._call(p) for p in todo]
        self.count += len(todo)
        for i, e in zip(pending, values):
            results[i] = self.cache[tuple(points[i].tolist())] = e
        if self.max_evaluations is not None and self.count >= self.max_evaluations:
            self.exhausted = True
        return results


# ---------------------------------------------------------------------------
# search and poll
# ---------------------------------------------------------------------------


@dataclass
class SearchContext:
    barrier: BarrierState
    mesh: MeshState
    scale: np.ndarray
    last_success: tuple[np.ndarray, np.ndarray] | None = None


class SearchStrategy(Protocol):
    def propose(self, context: SearchContext) -> list[np.ndarray]: ...


@dataclass
class SpeculativeSearch:
    """After a dominating iteration, try ``c + factor * (c - c_prev)``."""

    factor: float = 2.0

    def propose(self, context: SearchContext) -> list[np.ndarray]:
        if context.last_success is None:
            return []
        prev, new = context.last_success
        return [new + self.factor * (new - prev)]


def snap_to_mesh(point, anchor, mesh: MeshState, scale) -> np.ndarray:
    step = mesh.mesh_size * np.asarray(scale, dtype=float)
    return anchor + np.round((np.asarray(point, dtype=float) - anchor) / step) * step


def _in_chunks(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _run_points(barrier, points, evaluate, opportunistic: bool, chunk: int):
    """Evaluate and classify ``points``; opportunistic mode stops at the first dominator."""
    if not points:
        return None, barrier
    if not opportunistic:
        evals = evaluate(points)
        outcome, barrier, _ = _classify(barrier, points[: len(evals)], evals, False)
        return outcome, barrier
    seen_p: list = []
    seen_e: list = []
    for block in _in_chunks(points, chunk):
        evals = evaluate(block)
        seen_p.extend(block[: len(evals)])
        seen_e.extend(evals)
        outcome, new_barrier, _ = _classify(barrier, seen_p, seen_e, True)
        if outcome is Outcome.DOMINATING or len(evals) < len(block):
            return outcome, new_barrier
    return _classify(barrier, seen_p, seen_e, True)[:2]


def poll_points(barrier: BarrierState, mesh: MeshState, directions: np.ndarray, scale) -> list[np.ndarray]:
    step = mesh.mesh_size * np.asarray(scale, dtype=float)
    return [inc.point + step * d for inc in barrier.incumbents() for d in directions]


def poll_step(
    barrier: BarrierState,
    mesh: MeshState,
    evaluator: Blackbox | Callable[[list], list],
    directions: np.ndarray | None = None,
    *,
    scale=None,
    opportunistic: bool = True,
    rng: np.random.Generator | int = 0,
    chunk: int = 1,
    batch: bool = False,
) -> tuple[Outcome, BarrierState]:
    """Poll around every incumbent and classify the iteration.

    ``evaluator`` maps one point to an :class:`Evaluation`; pass
    ``batch=True`` when it maps a list of points to a list of evaluations.
    """
    dim = barrier.incumbents()[0].point.shape[0]
    scale = np.ones(dim) if scale is None else np.asarray(scale, dtype=float)
    if directions is None:
        directions = generate_poll_directions(dim, mesh, rng)
    evaluate = evaluator if batch else _safe_batch(evaluator)
    outcome, barrier = _run_points(barrier, poll_points(barrier, mesh, directions, scale), evaluate, opportunistic, chunk)
    return (outcome or Outcome.UNSUCCESSFUL), barrier


def search_step(
    barrier: BarrierState,
    mesh: MeshState,
    strategy: SearchStrategy | None,
    evaluator,
    *,
    scale=None,
    last_success=None,
    batch: bool = False,
) -> tuple[Outcome | None, BarrierState, int]:
    """Evaluate the strategy's proposals, snapped onto the mesh.

    Returns ``(DOMINATING, barrier, n)`` when a proposal dominates an
    incumbent, else ``(None, barrier, n)`` where ``n`` is the number of
    proposals. Only domination ends the iteration early; improving points
    found by the search are ignored.
    """
    if strategy is None:
        return None, barrier, 0
    anchor = (barrier.feasible or barrier.infeasible).point
    scale = np.ones_like(anchor) if scale is None else np.asarray(scale, dtype=float)
    raw = strategy.propose(SearchContext(barrier, mesh, scale, last_success))
    points = [snap_to_mesh(s, anchor, mesh, scale) for s in raw]
    if not points:
        return None, barrier, 0
    evaluate = evaluator if batch else _safe_batch(evaluator)
    evals = evaluate(points)
    for p, e in zip(points, evals):
        outcome, new_barrier, _ = _classify(barrier, [p], [e], True)
        if outcome is Outcome.DOMINATING:
            return outcome, new_barrier, len(points)
    return None, barrier, len(points)


def _safe_batch(blackbox: Blackbox):
    def evaluate(points):
        out = []
        for p in points:
            try:
                out.append(blackbox(p))
            except Exception:
                out.append(Evaluation.reject())
        return out

    return evaluate


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass
class SolverConfig:
    initial_frame: float = 1.0
    tau: float = 0.5
    frame_tolerance: float = 1e-7
    max_evaluations: int | None = None
    max_iterations: int | None = None
    seed: int = 0
    opportunistic: bool = True
    barrier: str = "progressive"
    search: SearchStrategy | None = None
    workers: int = 1

    def __post_init__(self):
        if not (self.initial_frame > 0 and math.isfinite(self.initial_frame)):
            raise ConfigurationError(f"initial_frame must be positive, got {self.initial_frame!r}")
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau must lie in (0, 1), got {self.tau!r}")
        if not self.frame_tolerance >= 0:
            raise ConfigurationError(f"frame_tolerance must be >= 0, got {self.frame_tolerance!r}")
        if self.barrier not in ("extremal", "progressive"):
            raise ConfigurationError(f"barrier must be 'extremal' or 'progressive', got {self.barrier!r}")
        for name in ("max_evaluations", "max_iterations"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    frame_size: float
    mesh_size: float
    eta: float
    f_feasible: float
    f_infeasible: float
    h_infeasible: float
    outcome: Outcome
    evaluations: int


@dataclass
class SolveReport:
    best_feasible: Incumbent | None
    best_infeasible: Incumbent | None
    iterations: int
    evaluations: int
    history: list[IterationRecord]
    termination_reason: TerminationReason
    final_frame: float = math.nan

    @property
    def best(self) -> Incumbent:
        return self.best_feasible if self.best_feasible is not None else self.best_infeasible

    def to_dict(self) -> dict:
        def pack(inc: Incumbent | None, with_h: bool):
            if inc is None:
                return None
            out = {"point": inc.point.tolist(), "F": inc.cost}
            if with_h:
                out["H"] = inc.violation
            return out

        return {
            "termination_reason": self.termination_reason.value,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "best_feasible": pack(self.best_feasible, False),
            "best_infeasible": pack(self.best_infeasible, True),
        }


def _initial_barrier(points, evals) -> BarrierState:
    feasible = [(p, e) for p, e in zip(points, evals) if e.feasible and math.isfinite(e.cost)]
    infeasible = [(p, e) for p, e in zip(points, evals) if not e.feasible and not e.rejected]
    f_inc = Incumbent(*min(feasible, key=lambda pe: _sort_key(*pe))) if feasible else None
    i_inc = None
    if infeasible:
        p, e = min(infeasible, key=lambda pe: (pe[1].violation, pe[1].cost, tuple(pe[0].tolist())))
        i_inc = Incumbent(p, e)
    if f_inc is None and i_inc is None:
        raise ConfigurationError("no starting point produced a finite evaluation")
    return BarrierState(f_inc, i_inc, math.inf)


def solve(
    blackbox: Blackbox,
    initial,
    config: SolverConfig = SolverConfig(),
    *,
    lower=None,
    upper=None,
    scale=None,
) -> SolveReport:
    """Minimize ``blackbox`` from one or two starting points.

    Parameters
    ----------
    blackbox
        ``point -> Evaluation``. A ``contains`` attribute (as on
        :class:`ExtremalBarrier`) is used as search-space membership, so
        rejected points cost no evaluations.
    initial
        A single point of shape ``(m,)`` or a sequence of starting points.
    lower, upper
        Optional box bounds, enforced as extremal membership.
    scale
        Per-coordinate mesh scaling; the mesh in coordinate ``i`` is
        ``scale[i] * delta``.

    Raises
    ------
    ConfigurationError
        In extremal mode when no starting point is feasible, or when no
        starting point evaluates to a finite result.
    """
    starts = np.atleast_2d(np.asarray(initial, dtype=float))
    dim = starts.shape[1]
    scale = np.ones(dim) if scale is None else np.asarray(scale, dtype=float)
    if scale.shape != (dim,) or np.any(scale <= 0):
        raise ConfigurationError("scale must be a positive vector matching the dimension")

    checks = []
    if getattr(blackbox, "contains", None) is not None:
        checks.append(blackbox.contains)
    if lower is not None or upper is not None:
        lo = np.full(dim, -np.inf) if lower is None else np.asarray(lower, dtype=float)
        hi = np.full(dim, np.inf) if upper is None else np.asarray(upper, dtype=float)
        checks.append(box_membership(lo, hi))
    membership = (lambda p: all(check(p) for check in checks)) if checks else None

    ev = _Evaluator(blackbox, membership, config.barrier, config.max_evaluations, config.workers)
    try:
        return _solve(ev, [s.copy() for s in starts], config, scale, dim)
    finally:
        ev.close()


def _solve(ev: _Evaluator, starts, config: SolverConfig, scale, dim) -> SolveReport:
    start_evals = ev.evaluate(starts)
    if len(start_evals) < len(starts):
        raise ConfigurationError("evaluation budget is smaller than the number of starting points")
    if config.barrier == "extremal" and not any(e.feasible for e in start_evals):
        raise ConfigurationError("extremal barrier requires a feasible starting point")
    barrier = _initial_barrier(starts, start_evals)

    rng = np.random.default_rng(config.seed)
    mesh = MeshState(config.initial_frame, config.tau)
    chunk = config.workers
    history: list[IterationRecord] = []
    last_success = None
    reason = None
    k = 0
    while True:
        if mesh.frame_size < config.frame_tolerance:
            reason = TerminationReason.FRAME_TOLERANCE
        elif config.max_iterations is not None and k >= config.max_iterations:
            reason = TerminationReason.MAX_ITERATIONS
        elif ev.exhausted:
            reason = TerminationReason.MAX_EVALUATIONS
        if reason is not None:
            break

        before = barrier
        outcome, barrier, _ = search_step(
            barrier, mesh, config.search, ev.evaluate, scale=scale, last_success=last_success, batch=True
        )
        if outcome is None and not ev.exhausted:
            directions = generate_poll_directions(dim, mesh, rng)
            points = poll_points(barrier, mesh, directions, scale)
            outcome, barrier = _run_points(barrier, points, ev.evaluate, config.opportunistic, chunk)
        outcome = outcome or Outcome.UNSUCCESSFUL

        last_success = None
        if outcome is Outcome.DOMINATING:
            if barrier.feasible is not before.feasible and before.feasible is not None:
                last_success = (before.feasible.point, barrier.feasible.point)
            elif barrier.infeasible is not before.infeasible and before.infeasible is not None:
                last_success = (before.infeasible.point, barrier.infeasible.point)

        f_inc, i_inc = barrier.feasible, barrier.infeasible
        history.append(
            IterationRecord(
                k=k,
                frame_size=mesh.frame_size,
                mesh_size=mesh.mesh_size,
                eta=barrier.eta,
                f_feasible=f_inc.cost if f_inc else math.nan,
                f_infeasible=i_inc.cost if i_inc else math.nan,
                h_infeasible=i_inc.violation if i_inc else math.nan,
                outcome=outcome,
                evaluations=ev.count,
            )
        )
        mesh = mesh.updated(outcome)
        k += 1

    return SolveReport(
        best_feasible=barrier.feasible,
        best_infeasible=barrier.infeasible,
        iterations=k,
        evaluations=ev.count,
        history=history,
        termination_reason=reason,
        final_frame=mesh.frame_size,
    )
