import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entlp.bounds import worst_case_assignment_cost
from entlp.model import AssignmentInstance, InstanceError, LpInstance, SimplexFamily, profile, random_instance
from entlp.solver import (
    ConvergenceWarning,
    ScalingState,
    gibbs_vector,
    kkt_residual,
    marginal_error,
    select_route,
    solve,
    solve_dual_ascent,
    solve_gibbs,
    solve_sinkhorn,
)

# 1 / (1 + 2 exp(-10)), 30-digit mpmath
X0_D3_ETA10 = 0.999909208384340978


# ---------------------------------------------------------------------------
# Gibbs


def test_gibbs_two_point():
    sol = solve_gibbs(SimplexFamily(2, 1.0, 1.0), math.log(2))
    np.testing.assert_allclose(sol.x_eta, [2 / 3, 1 / 3], atol=1e-15)
    assert sol.route == "gibbs"


def test_gibbs_small_eta_is_uniform():
    sol = solve_gibbs(SimplexFamily(7, 1.0, 3.0), 1e-12)
    np.testing.assert_allclose(sol.x_eta, np.full(7, 3 / 7), rtol=1e-10)


def test_gibbs_large_eta():
    x = solve_gibbs(SimplexFamily(3, 1.0, 1.0), 10.0).x_eta
    assert x[0] == pytest.approx(X0_D3_ETA10, abs=1e-15)


def test_gibbs_no_overflow():
    x = solve_gibbs(SimplexFamily(5, 1.0, 1.0), 1e4).x_eta
    assert np.all(np.isfinite(x)) and x[0] == 1.0


def test_gibbs_rejects_general_instance():
    with pytest.raises(InstanceError):
        solve_gibbs(random_instance(np.random.default_rng(0), 5, 2), 1.0)


def test_gibbs_vector_sums_to_beta():
    x = gibbs_vector(np.array([3.0, -1.0, 0.5]), 4.0, 2.5)
    assert x.sum() == pytest.approx(2.5, rel=1e-15)


# ---------------------------------------------------------------------------
# Sinkhorn


def test_sinkhorn_zero_cost_uniform():
    sol, _ = solve_sinkhorn(AssignmentInstance(np.zeros((4, 4))), 3.0)
    np.testing.assert_allclose(sol.x_eta, 0.25, atol=1e-15)


def test_sinkhorn_single_point():
    sol, state = solve_sinkhorn(AssignmentInstance([[5.0]]), 2.0)
    assert sol.iterations == 1
    np.testing.assert_allclose(sol.x_eta, [1.0])
    assert marginal_error(state) == 0.0


def test_sinkhorn_matches_dual_worst_case():
    inst = worst_case_assignment_cost(3)
    xs = solve_sinkhorn(inst, 5.0)[0].x_eta
    xd = solve_dual_ascent(inst, 5.0).x_eta
    assert np.max(np.abs(xs - xd)) <= 1e-6


def test_sinkhorn_state_reconstruction_is_exact():
    inst = AssignmentInstance(np.random.default_rng(4).uniform(0, 2, (5, 5)))
    sol, state = solve_sinkhorn(inst, 3.0)
    assert np.array_equal(sol.x_eta, state.plan().ravel())
    X = state.plan()
    assert np.all(X > 0) and np.all(X <= 1)
    np.testing.assert_array_equal(state.kernel_log, -3.0 * inst.C)


def test_sinkhorn_converged_marginals():
    inst = AssignmentInstance(np.random.default_rng(5).uniform(0, 1, (6, 6)))
    sol, state = solve_sinkhorn(inst, 4.0, tol=1e-8)
    assert sol.converged
    assert marginal_error(state) <= 1e-8
    assert sol.feasibility_residual <= 1e-8


def test_sinkhorn_nonconvergence_reported():
    inst = worst_case_assignment_cost(4)
    with pytest.warns(ConvergenceWarning):
        sol, state = solve_sinkhorn(inst, 30.0, tol=1e-14, max_iter=5)
    assert not sol.converged
    assert sol.iterations == 5
    assert marginal_error(state) > 1e-14


def test_marginal_error_examples():
    n = 3
    exact = ScalingState(np.zeros(n), np.zeros(n), np.full((n, n), -math.log(n)))
    assert marginal_error(exact) == pytest.approx(0.0, abs=1e-15)
    unscaled = ScalingState(np.zeros(2), np.zeros(2), np.zeros((2, 2)))
    assert marginal_error(unscaled) == 1.0


# ---------------------------------------------------------------------------
# dual Newton


@pytest.mark.parametrize("d,alpha,beta,eta", [
    (2, 1.0, 1.0, 0.5), (3, 1.0, 1.0, 10.0), (10, 0.2, 3.0, 30.0), (50, 2.0, 0.5, 25.0),
    (4, 1.0, 1.0, 500.0),
])
def test_dual_matches_gibbs(d, alpha, beta, eta):
    fam = SimplexFamily(d, alpha, beta)
    xd = solve_dual_ascent(fam, eta).x_eta
    assert np.max(np.abs(xd - gibbs_vector(fam.cost, eta, beta))) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=20), st.floats(0.01, 40), st.floats(0.1, 5))
def test_dual_matches_gibbs_random_cost(c, eta, beta):
    lp = LpInstance(np.ones((1, len(c))), [beta], c)
    xd = solve_dual_ascent(lp, eta).x_eta
    assert np.max(np.abs(xd - gibbs_vector(np.array(c), eta, beta))) <= 1e-8


def test_dual_single_feasible_point():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    x0 = np.array([0.4, 1.3])
    lp = LpInstance(A, A @ x0, [1.0, -2.0])
    for eta in (0.1, 1.0, 50.0):
        np.testing.assert_allclose(solve_dual_ascent(lp, eta).x_eta, x0, atol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_dual_matches_sinkhorn_birkhoff(n):
    inst = AssignmentInstance(np.random.default_rng(n).uniform(0, 1, (n, n)))
    for eta in (1.0, 5.0, 20.0):
        xs = solve_sinkhorn(inst, eta)[0].x_eta
        xd = solve_dual_ascent(inst, eta).x_eta
        assert np.max(np.abs(xs - xd)) <= 1e-6


def test_dual_handles_large_eta():
    inst = random_instance(np.random.default_rng(7), 8, 4)
    sol = solve_dual_ascent(inst, 1e4)
    assert sol.feasibility_residual <= 1e-8
    assert np.all(np.isfinite(sol.x_eta))


def test_dual_rejects_bad_eta():
    with pytest.raises(ValueError):
        solve_dual_ascent(SimplexFamily(3), 0.0)
    with pytest.raises(ValueError):
        solve_dual_ascent(SimplexFamily(3), math.inf)


# ---------------------------------------------------------------------------
# cross-route properties


def _route_cases():
    rng = np.random.default_rng(21)
    yield SimplexFamily(6, 0.7, 1.5), "gibbs"
    yield AssignmentInstance(rng.uniform(0, 1, (4, 4))), "sinkhorn"
    yield random_instance(rng, 7, 3), "dual_ascent"


@pytest.mark.parametrize("inst,route", list(_route_cases()))
@pytest.mark.parametrize("eta", [0.3, 3.0, 15.0])
def test_kkt_residual(inst, route, eta):
    sol = solve(inst, eta, route=route)
    assert sol.route == route
    assert np.all(sol.x_eta > 0)
    assert kkt_residual(inst, sol) <= 1e-6
    assert sol.feasibility_residual <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_objective_nonincreasing_in_eta(seed):
    inst = random_instance(np.random.default_rng(100 + seed), 8, 3)
    objs = [solve_dual_ascent(inst, eta).primal_objective for eta in np.geomspace(0.05, 200, 25)]
    assert np.all(np.diff(objs) <= 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_slow_rate_envelope(seed):
    inst = random_instance(np.random.default_rng(200 + seed), 7, 2)
    prof = profile(inst)
    for eta in np.geomspace(0.01, 100, 12):
        sol = solve_dual_ascent(inst, eta, optimal_value=prof.optimal_value)
        assert sol.gap <= prof.entropic_radius / eta + 1e-6
        assert sol.gap >= -1e-9


def test_auto_route_selection():
    assert select_route(SimplexFamily(3)) == "gibbs"
    assert select_route(AssignmentInstance(np.eye(3))) == "sinkhorn"
    assert select_route(AssignmentInstance(np.eye(3)).to_lp()) == "sinkhorn"
    assert select_route(random_instance(np.random.default_rng(0), 5, 2)) == "dual_ascent"


def test_auto_falls_back_when_sinkhorn_stalls():
    inst = worst_case_assignment_cost(2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sol = solve(inst, 40.0)
    assert sol.route == "dual_ascent"
    assert sol.feasibility_residual <= 1e-8


def test_solution_serialises():
    d = solve(SimplexFamily(3), 2.0, optimal_value=0.0).to_dict()
    assert d["route"] == "gibbs" and len(d["x_eta"]) == 3 and d["gap"] > 0
