import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entlp.model import (
    AssignmentInstance,
    EnumerationBudgetError,
    InstanceError,
    LpInstance,
    SimplexFamily,
    binary_entropy,
    binary_entropy_array,
    entropy,
    enumerate_vertices,
    is_bounded,
    load_instance,
    parse_instance,
    permutation_matrices,
    polytope_vertices,
    profile,
    random_instance,
    tau_gap,
    validate,
)

# values frozen from a 30-digit mpmath evaluation of the defining sums
H_TWO_THIRDS = 0.636514168294812818
H_BINARY_TENTH = 0.325082973391448240


def _naive_entropy(x):
    return sum(-xi * math.log(xi) for xi in x if xi > 0)


# ---------------------------------------------------------------------------
# entropy


def test_entropy_point_mass():
    assert entropy([1.0, 0.0, 0.0]) == 0.0


def test_entropy_uniform():
    assert entropy(np.full(4, 0.25)) == pytest.approx(math.log(4), abs=1e-15)


def test_entropy_two_thirds():
    assert entropy([2 / 3, 1 / 3]) == pytest.approx(H_TWO_THIRDS, abs=1e-15)


@pytest.mark.parametrize("bad", [[-0.1, 1.1], [np.nan, 1.0], [np.inf, 0.0]])
def test_entropy_rejects(bad):
    with pytest.raises(ValueError):
        entropy(bad)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=12))
def test_entropy_matches_naive_sum(xs):
    assert entropy(xs) == pytest.approx(_naive_entropy(xs), rel=1e-12, abs=1e-12)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert binary_entropy(0.1) == pytest.approx(H_BINARY_TENTH, abs=1e-15)


@pytest.mark.parametrize("lam", [-1e-9, 1.0 + 1e-9, 2.0])
def test_binary_entropy_range(lam):
    with pytest.raises(ValueError):
        binary_entropy(lam)


def test_binary_entropy_small_argument_accuracy():
    lam = 1e-12
    expected = lam * math.log(1 / lam) + lam - lam**2 / 2
    assert binary_entropy(lam) == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# lemma properties


@settings(max_examples=300)
@given(
    st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=10),
    st.floats(0, 1),
)
def test_weak_convexity(pairs, lam):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    lhs = entropy(lam * x + (1 - lam) * y)
    rhs = lam * entropy(x) + (1 - lam) * entropy(y) + max(x.sum(), y.sum()) * binary_entropy(lam)
    assert lhs <= rhs + 1e-12


@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_monotone_on_initial_interval(alpha, beta):
    grid = np.linspace(0, beta / (alpha + beta), 501)
    f = alpha * binary_entropy_array(grid) + beta * grid
    assert np.all(np.diff(f) >= -1e-12)


@given(st.floats(1e-300, 1.0))
def test_binary_entropy_ratio_bound(rho):
    assert binary_entropy(rho) / rho <= math.log(1 / rho) + 1 + 1e-12


# ---------------------------------------------------------------------------
# vertices


def _as_set(vs):
    return {tuple(np.round(v, 9)) for v in vs}


def test_vertices_scaled_simplex():
    verts = enumerate_vertices(SimplexFamily(3, 1.0, 2.0))
    assert _as_set(verts) == _as_set(2 * np.eye(3))


def test_vertices_birkhoff_3_are_permutations():
    inst = AssignmentInstance(np.arange(9.0).reshape(3, 3))
    verts = enumerate_vertices(inst)
    assert len(verts) == 6
    assert _as_set(verts) == _as_set(permutation_matrices(3))


def test_vertices_birkhoff_4_shortcut_matches_enumeration():
    inst = AssignmentInstance(np.ones((4, 4)))
    verts = enumerate_vertices(inst, max_columns=16)
    assert len(verts) == 24
    assert _as_set(verts) == _as_set(polytope_vertices(inst))


def test_vertices_segment():
    inst = LpInstance([[1.0, 1.0]], [1.0], [0.0, 1.0])
    assert _as_set(enumerate_vertices(inst)) == {(1.0, 0.0), (0.0, 1.0)}


def test_vertices_sorted_and_deterministic():
    inst = random_instance(np.random.default_rng(3), 7, 3)
    v1 = enumerate_vertices(inst)
    v2 = enumerate_vertices(inst)
    assert all(np.array_equal(a, b) for a, b in zip(v1, v2))
    keys = [tuple(v) for v in v1]
    assert keys == sorted(keys)


def test_enumeration_budget():
    inst = LpInstance(np.ones((1, 15)), [1.0], np.arange(15.0))
    with pytest.raises(EnumerationBudgetError):
        enumerate_vertices(inst)


def test_infeasible_instance():
    with pytest.raises(InstanceError):
        enumerate_vertices(LpInstance([[1.0, 1.0]], [-1.0], [0.0, 1.0]))


def test_inconsistent_redundant_rows():
    with pytest.raises(InstanceError):
        enumerate_vertices(LpInstance([[1.0, 1.0], [2.0, 2.0]], [1.0, 3.0], [0.0, 1.0]))


def test_unbounded_detected():
    inst = LpInstance([[1.0, -1.0, 0.0]], [0.0], [1.0, 0.0, 2.0])
    assert not is_bounded(inst)
    with pytest.raises(InstanceError, match="unbounded"):
        validate(inst)


def test_bounded_without_cheap_certificate():
    # x1 - x2 = 0, x2 + x3 = 1: no y with A'y = 1, still bounded
    inst = LpInstance([[1.0, -1.0, 0.0], [0.0, 1.0, 1.0]], [0.0, 1.0], [1.0, 0.0, 0.0])
    assert is_bounded(inst)


@pytest.mark.parametrize("seed", range(8))
def test_vertex_oracle_soundness(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, int(rng.integers(3, 10)), int(rng.integers(1, 4)))
    verts = enumerate_vertices(inst)
    for v in verts:
        assert np.all(v >= 0)
        assert np.max(np.abs(inst.A @ v - inst.b)) <= 1e-9
        # basic: columns on the support are linearly independent
        supp = v > 1e-12
        assert np.linalg.matrix_rank(inst.A[:, supp]) == supp.sum()
    # no vertex is the midpoint of two others
    for u, w in itertools.combinations(verts, 2):
        mid = (u + w) / 2
        assert all(np.max(np.abs(mid - v)) > 1e-9 for v in verts)


# ---------------------------------------------------------------------------
# profile


@pytest.mark.parametrize("d,alpha,beta", [(2, 1.0, 1.0), (5, 0.3, 2.0), (12, 2.5, 0.7)])
def test_profile_simplex_family(d, alpha, beta):
    prof = profile(SimplexFamily(d, alpha, beta))
    assert prof.gap == pytest.approx(alpha * beta, rel=1e-14)
    assert prof.l1_radius == pytest.approx(beta, rel=1e-14)
    assert prof.entropic_radius == pytest.approx(beta * math.log(d), rel=1e-10)
    assert prof.optimal_value == 0.0
    assert len(prof.optimal) == 1


def test_profile_birkhoff_4():
    rng = np.random.default_rng(1)
    prof = profile(AssignmentInstance(rng.integers(0, 6, (4, 4))))
    assert prof.l1_radius == 4
    assert prof.entropic_radius == pytest.approx(4 * math.log(4), abs=1e-10)
    assert prof.gap >= 1


def test_profile_rejects_constant_objective():
    inst = LpInstance([[1.0, 1.0, 1.0]], [1.0], [2.0, 2.0, 2.0])
    with pytest.raises(InstanceError):
        profile(inst)
    with pytest.raises(InstanceError):
        validate(inst)


@pytest.mark.parametrize("seed", range(6))
def test_profile_invariants(seed):
    inst = random_instance(np.random.default_rng(seed), 7, 3)
    prof = profile(inst)
    assert set(prof.optimal) | set(prof.suboptimal) == set(range(len(prof.vertices)))
    assert not set(prof.optimal) & set(prof.suboptimal)
    vals = np.array([inst.c @ v for v in prof.vertices])
    assert prof.gap == pytest.approx(np.min(vals[list(prof.suboptimal)]) - vals.min())
    assert prof.gap > 0
    assert prof.l1_radius == pytest.approx(max(v.sum() for v in prof.vertices))
    # the maximum entropy over P dominates every vertex entropy
    hv = [entropy(v) for v in prof.vertices]
    assert entropy(prof.max_entropy_point) >= max(hv) - 1e-12
    assert prof.entropic_radius == pytest.approx(entropy(prof.max_entropy_point) - min(hv))
    x = prof.max_entropy_point
    assert np.max(np.abs(inst.A @ x - inst.b)) < 1e-8


def test_max_entropy_point_beats_random_feasible_points():
    # brute force: convex combinations of vertices never exceed the solver's max
    inst = random_instance(np.random.default_rng(11), 6, 2)
    prof = profile(inst)
    V = np.array(prof.vertices)
    rng = np.random.default_rng(0)
    best = max(entropy(rng.dirichlet(np.ones(len(V))) @ V) for _ in range(2000))
    assert best <= entropy(prof.max_entropy_point) + 1e-12


# ---------------------------------------------------------------------------
# tau gap


def test_tau_gap_three_values():
    prof = profile(LpInstance(np.ones((1, 3)), [1.0], [0.0, 0.01, 1.0]))
    gap_tau, o_tau = tau_gap(prof, 0.05)
    assert gap_tau == pytest.approx(0.99, abs=1e-15)
    assert len(o_tau) == 2


def test_tau_gap_below_gap_keeps_optimal_set():
    prof = profile(random_instance(np.random.default_rng(2), 6, 2))
    gap_tau, o_tau = tau_gap(prof, prof.gap / 2)
    assert o_tau == prof.optimal
    assert gap_tau >= prof.gap


def test_tau_gap_everything_near_optimal():
    fam = SimplexFamily(4, 1.0, 1.0)
    gap_tau, o_tau = tau_gap(profile(fam), fam.alpha * fam.beta)
    assert math.isinf(gap_tau)
    assert len(o_tau) == 4


def test_tau_gap_rejects_nonpositive():
    with pytest.raises(ValueError):
        tau_gap(profile(SimplexFamily(3)), 0.0)


# ---------------------------------------------------------------------------
# instance documents


def test_parse_forms(tmp_path):
    lp = parse_instance({"A": [[1, 1]], "b": [1], "c": [0, 1], "integral_cost": True})
    assert isinstance(lp, LpInstance) and lp.integral_cost
    fam = parse_instance({"simplex": {"d": 4, "alpha": 2, "beta": 3}})
    assert fam == SimplexFamily(4, 2.0, 3.0)
    asg = parse_instance({"assignment": {"C": [[0, 1], [1, 0]]}})
    assert isinstance(asg, AssignmentInstance) and asg.n == 2
    p = tmp_path / "i.json"
    p.write_text(json.dumps({"simplex": {"d": 3}}))
    assert load_instance(p) == SimplexFamily(3)


@pytest.mark.parametrize("doc", [
    {"A": [[1, 1]], "b": [1]},
    {"A": [[1, 1]], "b": [1, 2], "c": [0, 1]},
    {"A": [[1, 1]], "b": [1], "c": [0, 0.5], "integral_cost": True},
    {"simplex": {"d": 1}},
    {"assignment": {"C": [[1, 2, 3]]}},
])
def test_parse_rejects(doc):
    with pytest.raises(InstanceError):
        parse_instance(doc)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InstanceError):
        load_instance(p)
    with pytest.raises(InstanceError):
        load_instance(tmp_path / "missing.json")


def test_instances_are_immutable():
    lp = LpInstance([[1.0, 1.0]], [1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        lp.c[0] = 5.0
