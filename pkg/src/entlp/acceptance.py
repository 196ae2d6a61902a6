"""
Release checks A1-A11.

Each check runs on seeded built-in instances and returns a
:class:`Criterion`; :func:`run_all` drives them for ``entlp verify`` and the
test suite. Details contain only deterministic quantities so that repeated
runs print identical summaries.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import bounds
from .model import (
    AssignmentInstance,
    LpInstance,
    SimplexFamily,
    binary_entropy_array,
    enumerate_vertices,
    profile,
    random_instance,
)
from .solver import gibbs_vector, solve, solve_dual_ascent, solve_gibbs, solve_sinkhorn

DEFAULT_SEED = 20180701


@dataclass(frozen=True)
class Criterion:
    name: str
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{self.name:<4} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.detail}"


# ---------------------------------------------------------------------------
# Instance sets


@lru_cache(maxsize=4)
def random_lp_suite(seed: int = DEFAULT_SEED, count: int = 20):
    """``count`` random bounded instances with n <= 10, m <= 5, and their profiles."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(3, 11))
        m = int(rng.integers(1, min(5, n - 1) + 1))
        inst = random_instance(rng, n, m)
        prof = profile(inst)
        out.append((inst, prof))
    return tuple(out)


def suite_grid(prof, count: int = 10) -> np.ndarray:
    """Log-spaced grid from well below to a few times the fast-rate threshold."""
    return np.geomspace(0.05, 3.0 * prof.fast_threshold, count)


def tied_instances(seed: int = DEFAULT_SEED):
    """Instances whose optimal face has more than one vertex."""
    rng = np.random.default_rng(seed + 9)
    out = [LpInstance(np.ones((1, 5)), [1.0], [0.0, 0.0, 0.7, 1.0, 1.3])]
    out.append(LpInstance([[1, 1, 0, 0], [0, 0, 1, 1]], [1.0, 2.0], [0.0, 0.0, 1.0, 0.0]))
    # identity and the (0 1) swap both cost 0
    out.append(AssignmentInstance([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
    while len(out) < 6:
        base = random_instance(rng, int(rng.integers(5, 9)), 2)
        verts = enumerate_vertices(base)
        if len(verts) < 3:
            continue
        i, j = rng.choice(len(verts), size=2, replace=False)
        support = (verts[i] > 1e-9) | (verts[j] > 1e-9)
        s = np.where(support, 0.0, rng.uniform(0.5, 1.5, size=base.n))
        y = rng.uniform(-1, 1, size=base.m)
        inst = base.with_cost(s + base.A.T @ y)
        try:
            prof = profile(inst)
        except ValueError:
            continue
        if len(prof.optimal) >= 2:
            out.append(inst)
    return out


def _random_integer_assignment(rng, n, K=9):
    while True:
        C = rng.integers(0, K + 1, size=(n, n)).astype(float)
        costs = {float(np.sum(C[np.arange(n), p])) for p in itertools.permutations(range(n))}
        if len(costs) > 1:
            return AssignmentInstance(C)


def brute_force_assignment(C) -> float:
    n = len(C)
    return min(float(sum(C[i][p[i]] for i in range(n))) for p in itertools.permutations(range(n)))


# ---------------------------------------------------------------------------
# Criteria


def a1_slow_rate(seed=DEFAULT_SEED) -> Criterion:
    t0 = time.perf_counter()
    worst = -math.inf
    bad = 0
    for inst, prof in random_lp_suite(seed):
        for eta in suite_grid(prof):
            sol = solve_dual_ascent(inst, eta, optimal_value=prof.optimal_value)
            excess = sol.gap - bounds.slow_bound(prof, eta)
            worst = max(worst, excess)
            bad += excess > 1e-6
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 10.0
    return Criterion("A1", "slow rate", ok,
                     f"200 points, {bad} violations, max(gap - bound) = {worst:.3e}, "
                     f"runtime {'<' if dt < 10 else '>='} 10 s", dt)


def a2_fast_rate(seed=DEFAULT_SEED) -> Criterion:
    t0 = time.perf_counter()
    worst = -math.inf
    checked = bad = 0
    for inst, prof in random_lp_suite(seed):
        for eta in suite_grid(prof):
            fb = bounds.fast_bound(prof, eta)
            if fb is None:
                continue
            sol = solve_dual_ascent(inst, eta, optimal_value=prof.optimal_value)
            checked += 1
            worst = max(worst, sol.gap - fb)
            bad += sol.gap > fb + 1e-6
    dt = time.perf_counter() - t0
    ok = bad == 0 and checked > 0 and dt < 10.0
    return Criterion("A2", "fast rate", ok,
                     f"{checked} points above threshold, {bad} violations, "
                     f"max(gap - bound) = {worst:.3e}, runtime {'<' if dt < 10 else '>='} 10 s", dt)


def a3_gibbs_closed_form(seed=DEFAULT_SEED) -> Criterion:
    rng = np.random.default_rng(seed + 3)
    worst = 0.0
    for _ in range(10):
        fam = SimplexFamily(int(rng.integers(2, 51)), float(rng.uniform(0.1, 2.0)),
                            float(rng.uniform(0.5, 3.0)))
        eta = float(rng.uniform(0.1, 30.0))
        x_dual = solve_dual_ascent(fam, eta).x_eta
        worst = max(worst, float(np.max(np.abs(x_dual - gibbs_vector(fam.cost, eta, fam.beta)))))
    return Criterion("A3", "Gibbs closed form", worst <= 1e-8,
                     f"10 instances, max l_inf(dual - Gibbs) = {worst:.3e} (tol 1e-08)")


def a4_no_progress() -> Criterion:
    worst = math.inf
    for d, eps in itertools.product((10, 100, 1000), (0.1, 0.5)):
        fam = SimplexFamily(d)
        eta = math.log(eps * d) / fam.alpha
        # eps * d = 1 puts the threshold at eta = 0, the uniform limit
        x = gibbs_vector(fam.cost, eta, fam.beta)
        margin = float(fam.cost @ x) - (1 - eps) * fam.alpha * fam.beta
        worst = min(worst, margin)
    return Criterion("A4", "simplex no-progress", worst >= -1e-10,
                     f"6 cases, min(objective - (1-eps) alpha beta) = {worst:.3e}")


def a5_simplex_rate() -> Criterion:
    fam = SimplexFamily(10)
    prof = profile(fam)
    worst_lb = math.inf
    worst_ratio = 0.0
    for eta in (1 + math.log(10), 5.0, 8.0):
        # the profile's threshold can sit an ulp above 1 + log 10
        eta = max(eta, prof.fast_threshold)
        obj = solve_gibbs(fam, eta).primal_objective
        lb = math.exp(-eta + 1 + math.log(10)) / 9
        worst_lb = min(worst_lb, obj - lb)
        worst_ratio = max(worst_ratio, bounds.fast_bound(prof, eta) / obj)
    ok = worst_lb >= -1e-10 and worst_ratio <= 9 * (1 + 1e-9)
    return Criterion("A5", "simplex lower rate", ok,
                     f"min(objective - lower) = {worst_lb:.3e}, max fast/measured = {worst_ratio:.9f}")


def a6_birkhoff_constants(seed=DEFAULT_SEED) -> Criterion:
    rng = np.random.default_rng(seed + 6)
    r1_exact = True
    worst = 0.0
    for n in (2, 3, 4, 5):
        prof = profile(_random_integer_assignment(rng, n))
        r1_exact &= prof.l1_radius == n
        worst = max(worst, abs(prof.entropic_radius - n * math.log(n)))
    return Criterion("A6", "Birkhoff constants", r1_exact and worst <= 1e-8,
                     f"R1 == n: {r1_exact}, max |RH - n log n| = {worst:.3e}")


def a7_assignment_upper(seed=DEFAULT_SEED) -> Criterion:
    rng = np.random.default_rng(seed + 7)
    n, eps = 5, 0.1
    inst = _random_integer_assignment(rng, n)
    opt = brute_force_assignment(inst.C)
    eta = n * math.log(1 / eps) + n * (1 + math.log(n))
    sol = solve(inst, eta, optimal_value=opt)
    return Criterion("A7", "assignment upper bound", sol.gap <= eps,
                     f"n=5, eta={eta:.4f}, gap = {sol.gap:.3e} (<= 0.1), route {sol.route}")


def a8_assignment_lower() -> Criterion:
    t0 = time.perf_counter()
    tol = 1e-8
    worst = math.inf
    for n, eps in itertools.product((4, 6, 8), (0.1, 0.25)):
        eta = bounds.assignment_eta_lower_threshold(n, eps) - 0.01
        sol, _ = solve_sinkhorn(bounds.worst_case_assignment_cost(n), eta, tol=tol,
                                optimal_value=0.0)
        worst = min(worst, sol.gap - (eps - tol))
    dt = time.perf_counter() - t0
    ok = worst >= 0 and dt < 30.0
    return Criterion("A8", "assignment lower bound", ok,
                     f"6 cases, min(gap - (eps - tol)) = {worst:.3e}, "
                     f"runtime {'<' if dt < 30 else '>='} 30 s", dt)


def a9_face_distance(seed=DEFAULT_SEED) -> Criterion:
    worst = -math.inf
    checked = 0
    for inst in tied_instances(seed):
        prof = profile(inst)
        for eta in prof.fast_threshold * np.array([1.0, 1.5, 2.5, 4.0]):
            sol = solve(inst, eta, optimal_value=prof.optimal_value)
            dist = bounds.face_distance(prof, sol.x_eta)
            worst = max(worst, dist - bounds.face_distance_bound(prof, eta))
            checked += 1
    return Criterion("A9", "face distance", worst <= 1e-6,
                     f"{checked} points on 6 tied instances, max(d1 - bound) = {worst:.3e}")


def lemma_trials(seed=DEFAULT_SEED, trials: int = 10_000):
    """Worst slack of the three entropy lemmas over randomized trials."""
    rng = np.random.default_rng(seed + 10)
    from scipy.special import entr

    # weak convexity
    k = 8
    x = rng.uniform(0, 2, size=(trials, k)) * (rng.uniform(size=(trials, k)) < 0.8)
    y = rng.uniform(0, 2, size=(trials, k)) * (rng.uniform(size=(trials, k)) < 0.8)
    lam = rng.uniform(size=(trials, 1))
    lam[:100] = 0.0
    lam[100:200] = 1.0
    H = lambda z: entr(z).sum(axis=1)
    lhs = H(lam * x + (1 - lam) * y)
    rhs = (lam[:, 0] * H(x) + (1 - lam[:, 0]) * H(y)
           + np.maximum(x.sum(1), y.sum(1)) * binary_entropy_array(lam[:, 0]))
    weak = float(np.max(lhs - rhs))

    # monotonicity of alpha h + beta lam on [0, beta/(alpha + beta)]
    a = rng.uniform(0.01, 10, size=(trials, 1))
    b = rng.uniform(0.01, 10, size=(trials, 1))
    grid = np.linspace(0, 1, 201)[None, :] * (b / (a + b))
    f = a * binary_entropy_array(grid) + b * grid
    mono = float(np.max(f[:, :-1] - f[:, 1:]))

    # h(rho)/rho <= log(1/rho) + 1
    rho = np.concatenate([10.0 ** rng.uniform(-12, 0, size=trials // 2),
                          rng.uniform(0, 1, size=trials - trials // 2)])
    rho = rho[rho > 0]
    ratio = binary_entropy_array(rho) / rho - (np.log(1 / rho) + 1)
    bent = float(np.max(ratio))
    return weak, mono, bent


def a10_lemmas(seed=DEFAULT_SEED) -> Criterion:
    weak, mono, bent = lemma_trials(seed)
    ok = max(weak, mono, bent) <= 1e-12
    return Criterion("A10", "entropy lemmas", ok,
                     f"3 x 10^4 trials, max excess: weak-convexity {weak:.2e}, "
                     f"monotone {mono:.2e}, binary-entropy {bent:.2e}")


def a11_cross_solver(seed=DEFAULT_SEED) -> Criterion:
    rng = np.random.default_rng(seed + 11)
    worst = 0.0
    count = 0
    for n in (2, 3, 4):
        for C in (bounds.worst_case_assignment_cost(n).C, rng.uniform(0, 1, size=(n, n))):
            inst = AssignmentInstance(C)
            for eta in (1.0, 5.0, 20.0):
                xs = solve_sinkhorn(inst, eta, tol=1e-10)[0].x_eta
                xd = solve_dual_ascent(inst, eta).x_eta
                worst = max(worst, float(np.max(np.abs(xs - xd))))
                count += 1
    return Criterion("A11", "Sinkhorn vs dual Newton", worst <= 1e-6,
                     f"{count} solves, max l_inf difference = {worst:.3e}")


CRITERIA = {
    "A1": a1_slow_rate,
    "A2": a2_fast_rate,
    "A3": a3_gibbs_closed_form,
    "A4": a4_no_progress,
    "A5": a5_simplex_rate,
    "A6": a6_birkhoff_constants,
    "A7": a7_assignment_upper,
    "A8": a8_assignment_lower,
    "A9": a9_face_distance,
    "A10": a10_lemmas,
    "A11": a11_cross_solver,
}


def run_all(names=None) -> list:
    names = list(CRITERIA) if names is None else names
    return [CRITERIA[k]() for k in names]


def summary(results) -> str:
    lines = [c.line() for c in results]
    npass = sum(c.passed for c in results)
    lines.append(f"{npass}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n"
