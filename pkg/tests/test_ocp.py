import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madsnmpc.integrator import IntegrationConfig
from madsnmpc.ocp import (
    DecisionHorizon,
    EventHorizon,
    FeedbackPolicyAdapter,
    FixedHorizon,
    InterpolatedPolynomial,
    MembershipError,
    OcpProblem,
    PiecewiseConstantSwitching,
    ZeroOrderHold,
    as_blackbox,
    augment,
    boundary_violation,
    decode_input,
    evaluate_candidate,
    overall_violation,
)

CFG = IntegrationConfig(abs_tol=1e-10, rel_tol=1e-10)


def linear_plant(**kw):
    """x' = u on [0, 1], x(0) = 0, Mayer term x(tf)."""
    base = dict(
        state_dim=1,
        input_dim=1,
        dynamics=lambda x, u, t: np.array([u[0]]),
        initial_state=np.zeros(1),
        horizon=FixedHorizon(0.0, 1.0),
        mayer=lambda xf, uf, tf: xf[0],
    )
    base.update(kw)
    return OcpProblem(**base)


# --- input parameterizations -----------------------------------------------


def test_zero_order_hold_semantics():
    u = decode_input([1.0, 2.0, 3.0], ZeroOrderHold(3), 0.0, 3.0)
    assert u(0.5)[0] == 1.0 and u(1.5)[0] == 2.0 and u(2.9)[0] == 3.0
    assert u.discontinuities == [1.0, 2.0]


def test_zero_order_hold_edges_take_the_new_value():
    # 0.1 * k is not exact in binary; the held value switches exactly at the edge list
    zoh = ZeroOrderHold(10)
    u = zoh.decode(np.arange(10.0), 0.0, 1.0)
    for k, edge in enumerate(u.discontinuities, start=1):
        assert u(edge)[0] == k
        assert u(np.nextafter(edge, -1.0))[0] == k - 1


def test_switching_semantics():
    param = PiecewiseConstantSwitching(2, 1, (0.0, 10.0), (0.0, 10.0))
    u = param.decode([7.0, 3.0, 4.0], 0.0, 10.0)
    assert u(3.9)[0] == 7.0 and u(4.1)[0] == 3.0
    assert u.discontinuities == [4.0]


def test_switching_order_is_membership():
    param = PiecewiseConstantSwitching(3, 1, (0.0, 1.0), (0.0, 10.0))
    assert not param.contains([0.5, 0.5, 0.5, 5.0, 3.0])
    assert param.contains([0.5, 0.5, 0.5, 3.0, 3.0])
    with pytest.raises(MembershipError):
        param.decode([0.5, 0.5, 0.5, 5.0, 3.0], 0.0, 10.0)


def test_interpolated_polynomial_reproduces_a_quadratic():
    param = InterpolatedPolynomial(3)
    knots = param.knot_times(0.0, 2.0)
    values = knots**2 - knots + 1.0
    u = param.decode(values, 0.0, 2.0)
    for t in (0.0, 0.3, 1.1, 2.0):
        assert u(t)[0] == pytest.approx(t * t - t + 1.0, abs=1e-12)
    assert u.discontinuities == []


def test_feedback_policy_adapter():
    # u = -k x on x' = u gives x(t) = exp(-k t)
    param = FeedbackPolicyAdapter(lambda p: (lambda t, x: -p[0] * x), 1, [0.0], [5.0])
    prob = linear_plant(initial_state=np.ones(1), mayer=None)
    ce = evaluate_candidate(prob, param, [2.0], CFG)
    assert ce.trajectory.terminal_state[0] == pytest.approx(math.exp(-2.0), abs=1e-8)


# --- augmentation -------------------------------------------------------------


def test_constant_lagrange_integrand():
    prob = linear_plant(horizon=FixedHorizon(0.0, 2.0), lagrange=lambda x, u, t: 1.0, mayer=None)
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [0.3], CFG)
    assert ce.cost == pytest.approx(2.0, abs=1e-8)


def test_violation_of_ramp():
    # x(t) = t, g = x
    prob = linear_plant(path_constraints=[lambda x, u, t: x[0]])
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [1.0], CFG)
    assert ce.path_violations[0] == pytest.approx(0.5, abs=1e-8)


def test_violation_of_shifted_ramp_is_a_hinge_integral():
    # x(t) = t - 0.5, g = x, active on [0.5, 1]
    prob = linear_plant(initial_state=np.array([-0.5]), path_constraints=[lambda x, u, t: x[0]])
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [1.0], CFG)
    assert ce.path_violations[0] == pytest.approx(0.125, abs=1e-6)
    v = ce.trajectory.states[:, 2]
    assert np.all(np.diff(v) >= 0.0)


def test_augment_stacks_plant_lagrange_and_hinges():
    prob = linear_plant(
        lagrange=lambda x, u, t: x[0] ** 2,
        path_constraints=[lambda x, u, t: x[0] - 1.0, lambda x, u, t: -x[0]],
    )
    system = augment(prob, ZeroOrderHold(1).decode([2.0], 0.0, 1.0))
    dz = system.rhs(0.0, np.array([3.0, 0.0, 0.0, 0.0]))
    np.testing.assert_array_equal(dz, [2.0, 9.0, 2.0, 0.0])
    assert system.dimension == 4


# --- boundary and overall violation ---------------------------------------


def test_boundary_violation_examples():
    prob0 = linear_plant(boundary_conditions=[lambda *a: 0.0, lambda *a: 0.0])
    assert boundary_violation(prob0, [0], [0], 0, [0], [0], 1) == 0.0
    prob1 = linear_plant(boundary_conditions=[lambda *a: -0.2], boundary_weights=[2.0])
    assert boundary_violation(prob1, [0], [0], 0, [0], [0], 1) == pytest.approx(0.4)
    prob2 = linear_plant(boundary_conditions=[lambda *a: 0.1, lambda *a: -0.3])
    assert boundary_violation(prob2, [0], [0], 0, [0], [0], 1) == pytest.approx(0.4)


def test_overall_violation_composition():
    assert overall_violation(0.5, [0.1, 0.2], [1.0, 2.0]) == pytest.approx(0.25 + 0.01 + 0.08)


# --- evaluate_candidate ---------------------------------------------------------


def test_linear_plant_cost():
    ce = evaluate_candidate(linear_plant(), ZeroOrderHold(1), [1.0], CFG)
    assert ce.cost == pytest.approx(1.0, abs=1e-10)
    assert ce.violation == 0.0 and ce.feasible


def test_linear_plant_path_violation():
    prob = linear_plant(path_constraints=[lambda x, u, t: x[0] - 0.5])
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [1.0], CFG)
    assert ce.path_violations[0] == pytest.approx(0.125, abs=1e-8)
    assert ce.violation == pytest.approx(0.015625, abs=1e-8)


def test_linear_plant_boundary_violation():
    prob = linear_plant(boundary_conditions=[lambda x0, u0, t0, xf, uf, tf: xf[0] - 2.0])
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [1.0], CFG)
    assert ce.boundary_violation == pytest.approx(1.0, abs=1e-10)
    assert ce.violation == pytest.approx(1.0, abs=1e-9)


def test_violation_reconstruction_is_exact():
    prob = linear_plant(
        path_constraints=[lambda x, u, t: x[0] - 0.2, lambda x, u, t: u[0] - 0.5],
        path_weights=[1.0, 3.0],
        boundary_conditions=[lambda x0, u0, t0, xf, uf, tf: xf[0] - 2.0],
        boundary_weights=[0.5],
    )
    ce = evaluate_candidate(prob, ZeroOrderHold(4), [1.0, 0.2, 0.9, -0.4], CFG)
    rebuilt = ce.boundary_violation**2 + float(np.sum(np.array([1.0, 3.0]) * ce.path_violations**2))
    assert ce.violation == rebuilt


def test_evaluation_is_pure():
    prob = linear_plant(path_constraints=[lambda x, u, t: x[0] - 0.2])
    a = evaluate_candidate(prob, ZeroOrderHold(3), [0.4, -0.2, 0.9], CFG)
    b = evaluate_candidate(prob, ZeroOrderHold(3), [0.4, -0.2, 0.9], CFG)
    assert a.cost == b.cost and a.violation == b.violation
    np.testing.assert_array_equal(a.trajectory.states, b.trajectory.states)


def test_input_jumps_restart_integration():
    # x(2) = 1 - 1 = 0 for ZOH (1, -1); RK is exact for piecewise-linear x
    prob = linear_plant(horizon=FixedHorizon(0.0, 2.0))
    ce = evaluate_candidate(prob, ZeroOrderHold(2), [1.0, -1.0], CFG)
    assert abs(ce.cost) < 1e-12
    assert 1.0 in ce.trajectory.times.tolist()


@pytest.mark.parametrize(
    "lagrange, exact",
    [
        (lambda x, u, t: 3.0, 3.0 * 2.0),
        (lambda x, u, t: t**3 - 2.0 * t, 2.0**4 / 4 - 2.0**2),
        (lambda x, u, t: math.sin(3.0 * t), (1.0 - math.cos(6.0)) / 3.0),
    ],
)
def test_quadrature_matches_analytic_integrals(lagrange, exact):
    cfg = IntegrationConfig(abs_tol=1e-9, rel_tol=1e-9)
    prob = linear_plant(horizon=FixedHorizon(0.0, 2.0), lagrange=lagrange, mayer=None)
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [0.0], cfg)
    assert abs(ce.cost - exact) <= 10 * (cfg.abs_tol + cfg.rel_tol * abs(exact))


def test_decision_horizon_uses_last_coordinate():
    prob = linear_plant(horizon=DecisionHorizon(0.0, 0.5, 3.0), lagrange=lambda x, u, t: 1.0, mayer=None)
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [1.0, 2.5], CFG)
    assert ce.trajectory.terminal_time == 2.5
    assert ce.cost == pytest.approx(2.5, abs=1e-9)
    bb = as_blackbox(prob, ZeroOrderHold(1, 1, -1.0, 1.0), CFG)
    assert bb([1.0, 3.5]).rejected


def test_event_horizon_stops_at_crossing():
    prob = linear_plant(
        initial_state=np.array([-1.0]),
        horizon=EventHorizon(0.0, lambda t, x: x[0], "rising", 10.0),
        mayer=lambda xf, uf, tf: tf,
    )
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [0.5], CFG)
    assert ce.cost == pytest.approx(2.0, abs=1e-9)


def test_missing_event_is_a_failed_evaluation():
    prob = linear_plant(horizon=EventHorizon(0.0, lambda t, x: x[0] - 5.0, "rising", 1.0))
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [1.0], CFG)
    assert math.isinf(ce.cost) and math.isinf(ce.violation)


def test_integration_failure_maps_to_infinity():
    prob = linear_plant(dynamics=lambda x, u, t: np.array([x[0] ** 2]), initial_state=np.ones(1), horizon=FixedHorizon(0.0, 2.0))
    ce = evaluate_candidate(prob, ZeroOrderHold(1), [0.0], IntegrationConfig(min_step=1e-6))
    assert math.isinf(ce.cost) and math.isinf(ce.violation)


# --- blackbox -----------------------------------------------------------------


def test_blackbox_feasible_and_violating_points():
    prob = linear_plant(path_constraints=[lambda x, u, t: x[0] - 0.5])
    bb = as_blackbox(prob, ZeroOrderHold(1, 1, -1.0, 1.0), CFG)
    assert bb([0.25]).feasible
    e = bb([1.0])
    assert 0 < e.violation < math.inf and math.isfinite(e.cost)
    assert e.internals[0] == 0.0 and e.internals[1] == pytest.approx(0.125, abs=1e-8)


def test_blackbox_rejects_without_simulation():
    calls = []
    prob = linear_plant(dynamics=lambda x, u, t: calls.append(t) or np.array([u[0]]))
    bb = as_blackbox(prob, PiecewiseConstantSwitching(2, 1, (-1.0, 1.0), (0.0, 1.0)), CFG)
    e = bb([0.5, 2.0, 0.5])
    assert e.cost == math.inf and e.violation == math.inf
    assert calls == [] and bb.inner_calls == 0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
def test_violation_accumulators_are_monotone_and_consistent(values):
    prob = linear_plant(
        path_constraints=[lambda x, u, t: x[0] - 0.1, lambda x, u, t: -x[0] - 0.1],
        lagrange=lambda x, u, t: u[0] ** 2,
        mayer=None,
    )
    ce = evaluate_candidate(prob, ZeroOrderHold(3), values, IntegrationConfig(abs_tol=1e-8, rel_tol=1e-8))
    _, _, v = prob.split_state(ce.trajectory.states)
    assert np.all(np.diff(v, axis=0) >= 0.0)
    assert ce.violation == float(np.sum(ce.path_violations**2))
    assert ce.cost >= 0.0
    # zero violation iff the sampled constraints stay inactive
    x = ce.trajectory.states[:, 0]
    if ce.violation == 0.0:
        assert np.all(np.abs(x) <= 0.1 + 1e-9)
