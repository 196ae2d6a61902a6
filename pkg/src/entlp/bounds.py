"""
Explicit convergence bounds for entropic penalization.

Upper bounds (slow rate, fast rate, distance to the optimal face, the
tau-relaxed variant) depend on an instance only through its
:class:`~entlp.model.PolytopeProfile`. Lower bounds are specific to the
scaled-simplex family and to the worst-case assignment cost.

Bounds that only hold above a threshold in ``eta`` return ``None`` below it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linprog

from .model import (
    AssignmentInstance,
    PolytopeProfile,
    SimplexFamily,
    as_lp,
    detect_structure,
    tau_gap,
)
from .solver import PenalizedSolution

SLACK = 1e-6


def _exp(logval: float) -> float:
    # math.exp underflows to 0.0 quietly; only overflow needs guarding
    return math.inf if logval > 709.0 else math.exp(logval)


def _fast_exponent(eta, gap, r1, rh):
    return -eta * gap / r1 + (r1 + rh) / r1


# ---------------------------------------------------------------------------
# Upper bounds


def slow_bound(prof: PolytopeProfile, eta: float) -> float:
    return prof.entropic_radius / eta


def fast_threshold(prof: PolytopeProfile, gap: float | None = None) -> float:
    gap = prof.gap if gap is None else gap
    return (prof.l1_radius + prof.entropic_radius) / gap


def log_fast_bound(prof: PolytopeProfile, eta: float, gap: float | None = None):
    """Natural log of the fast-rate bound, or None below its threshold."""
    gap = prof.gap if gap is None else gap
    if eta < fast_threshold(prof, gap):
        return None
    return math.log(gap) + _fast_exponent(eta, gap, prof.l1_radius, prof.entropic_radius)


def fast_bound(prof: PolytopeProfile, eta: float, gap: float | None = None):
    """``gap * exp(-eta gap / R1 + (R1 + RH) / R1)`` for eta at or above the threshold."""
    lf = log_fast_bound(prof, eta, gap)
    return None if lf is None else _exp(lf)


def face_distance_bound(prof: PolytopeProfile, eta: float):
    if eta < prof.fast_threshold:
        return None
    e = _fast_exponent(eta, prof.gap, prof.l1_radius, prof.entropic_radius)
    return _exp(math.log(2.0 * prof.l1_radius) + e)


def eta_for_epsilon(prof: PolytopeProfile, eps: float) -> float:
    """Penalty weight that guarantees an objective gap of at most ``eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    r1, gap = prof.l1_radius, prof.gap
    return max(r1 / gap * math.log(gap / eps), 0.0) + prof.fast_threshold


def rate_constant_sup(prof: PolytopeProfile) -> float:
    """Supremum of the exponential rates M with d1(x_eta, F) = o(exp(-M eta))."""
    return prof.gap / prof.l1_radius


def tau_fast_bound(prof: PolytopeProfile, eta: float, tau: float):
    """Fast-rate bound with the tau-relaxed gap, plus ``tau``; None below threshold."""
    gap_tau, _ = tau_gap(prof, tau)
    if math.isinf(gap_tau):
        return None
    b = fast_bound(prof, eta, gap_tau)
    return None if b is None else b + tau


def integral_fast_bound(prof: PolytopeProfile, eta: float):
    """Fast rate with the gap replaced by 1 (integral polytope, integer cost)."""
    r1, rh = prof.l1_radius, prof.entropic_radius
    if eta < r1 + rh:
        return None
    return _exp(_fast_exponent(eta, 1.0, r1, rh))


# ---------------------------------------------------------------------------
# Lower-bound constructions


def simplex_no_progress_threshold(fam: SimplexFamily, eps: float) -> float:
    """Largest eta at which the Gibbs objective still exceeds ``(1 - eps) alpha beta``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if eps * fam.d <= 1:
        raise ValueError("need eps * d > 1 for a positive threshold")
    return math.log(eps * fam.d) / fam.alpha


def simplex_rate_lower_bound(fam: SimplexFamily, eta: float):
    if eta < (1.0 + math.log(fam.d)) / fam.alpha:
        return None
    return _exp(math.log(fam.alpha * fam.beta / 9.0) - eta * fam.alpha + 1.0 + math.log(fam.d))


def simplex_lower_bound(fam: SimplexFamily, eta: float):
    """Best available lower bound on the Gibbs objective at ``eta``.

    Uses the rate bound above ``(1 + log d)/alpha``; below it, the
    no-progress bound with the smallest admissible ``eps = exp(eta alpha)/d``.
    """
    lb = simplex_rate_lower_bound(fam, eta)
    if lb is not None:
        return lb
    eps = math.exp(eta * fam.alpha) / fam.d
    if eps < 1:
        return (1.0 - eps) * fam.alpha * fam.beta
    return None


def worst_case_assignment_cost(n: int) -> AssignmentInstance:
    """0/1 cost that is zero on the diagonal and superdiagonal; identity is the unique optimum."""
    if n < 2:
        raise ValueError("worst-case assignment cost needs n >= 2")
    C = np.ones((n, n))
    idx = np.arange(n)
    C[idx, idx] = 0.0
    C[idx[:-1], idx[:-1] + 1] = 0.0
    return AssignmentInstance(C)


def assignment_eta_lower_threshold(n: int, eps: float) -> float:
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    return n * math.log((1.0 - eps) / eps)


def assignment_gap_lower_bound(n: int, eta: float) -> float:
    """Largest eps whose threshold ``n log((1-eps)/eps)`` is at least ``eta``."""
    return 1.0 / (1.0 + math.exp(min(eta / n, 709.0)))


def detect_family(inst):
    """Return the lower-bound family an instance belongs to, if any.

    ``SimplexFamily`` for a scaled simplex with cost ``(0, a, ..., a)``,
    ``("worst_case_assignment", n)`` for the worst-case 0/1 cost, else None.
    """
    if isinstance(inst, SimplexFamily):
        return inst
    lp = as_lp(inst)
    kind = detect_structure(lp)
    if kind is None:
        return None
    c = lp.c
    if kind[0] == "simplex":
        if lp.n >= 2 and c[0] == 0 and c[1] > 0 and np.all(c[1:] == c[1]):
            return SimplexFamily(lp.n, float(c[1]), kind[1])
        return None
    n = kind[1]
    if n >= 2 and np.array_equal(c, worst_case_assignment_cost(n).C.ravel()):
        return ("worst_case_assignment", n)
    return None


def family_lower_bound(family, eta: float):
    if family is None:
        return None
    if isinstance(family, SimplexFamily):
        return simplex_lower_bound(family, eta)
    return assignment_gap_lower_bound(family[1], eta)


# ---------------------------------------------------------------------------
# Distance to the optimal face


def face_distance(prof: PolytopeProfile, x) -> float:
    """l1 distance from ``x`` to the convex hull of the optimal vertices.

    One or two optimal vertices are handled in closed form; larger faces go
    through a small LP over the convex weights.
    """
    x = np.asarray(x, dtype=float)
    O = np.array(prof.optimal_vertices)
    if len(O) == 1:
        return float(np.sum(np.abs(x - O[0])))
    if len(O) == 2:
        # f(t) = |x - O1 - t (O0 - O1)|_1 is convex piecewise linear on [0, 1]
        r = x - O[1]
        d = O[0] - O[1]
        nz = d != 0
        cand = np.r_[0.0, 1.0, np.clip(r[nz] / d[nz], 0.0, 1.0)]
        return float(min(np.sum(np.abs(r - t * d)) for t in cand))
    k, n = O.shape
    # variables: weights lam (k), slacks s (n);  min sum s,  -s <= x - O'lam <= s
    cost = np.r_[np.zeros(k), np.ones(n)]
    A_ub = np.block([[-O.T, -np.eye(n)], [O.T, -np.eye(n)]])
    b_ub = np.r_[-x, x]
    A_eq = np.r_[np.ones(k), np.zeros(n)][None, :]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (k + n), method="highs")
    if res.status != 0:
        raise RuntimeError(f"face-distance LP failed: {res.message}")
    return float(res.fun)


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class BoundReport:
    eta: float
    gap: float
    l1_radius: float
    entropic_radius: float
    slow_bound: float
    fast_threshold: float
    fast_bound: float | None
    face_distance_bound: float | None
    rate_constant_M_sup: float
    measured_gap: float | None = None
    measured_face_distance: float | None = None
    lower_bound: float | None = None
    tau: float | None = None
    tau_gap: float | None = None
    tau_bound: float | None = None
    slack: float = SLACK
    slow_ok: bool | None = None
    fast_ok: bool | None = None
    face_ok: bool | None = None
    lower_ok: bool | None = None
    tau_ok: bool | None = None

    def eta_for_epsilon(self, eps: float) -> float:
        if not eps > 0:
            raise ValueError("eps must be positive")
        return (max(self.l1_radius / self.gap * math.log(self.gap / eps), 0.0)
                + self.fast_threshold)

    @property
    def passed(self) -> bool:
        flags = (self.slow_ok, self.fast_ok, self.face_ok, self.lower_ok, self.tau_ok)
        return all(f is not False for f in flags)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


def bound_report(prof: PolytopeProfile, eta: float, tau: float | None = None) -> BoundReport:
    """All profile-based bounds at ``eta``, without measured quantities."""
    tg = tb = None
    if tau is not None:
        tg, _ = tau_gap(prof, tau)
        tb = tau_fast_bound(prof, eta, tau)
    return BoundReport(
        eta=float(eta),
        gap=prof.gap,
        l1_radius=prof.l1_radius,
        entropic_radius=prof.entropic_radius,
        slow_bound=slow_bound(prof, eta),
        fast_threshold=prof.fast_threshold,
        fast_bound=fast_bound(prof, eta),
        face_distance_bound=face_distance_bound(prof, eta),
        rate_constant_M_sup=rate_constant_sup(prof),
        tau=tau,
        tau_gap=tg,
        tau_bound=tb,
    )


def check_report(
    prof: PolytopeProfile,
    sol: PenalizedSolution,
    family=None,
    tau: float | None = None,
    slack: float = SLACK,
) -> BoundReport:
    """Compare a solved instance against every applicable bound.

    Violations beyond ``slack`` show up as ``False`` flags; bounds that do
    not apply at ``sol.eta`` leave their flag as ``None``.
    """
    rep = bound_report(prof, sol.eta, tau)
    g = float(sol.primal_objective - prof.optimal_value)
    dist = face_distance(prof, sol.x_eta)
    lower = family_lower_bound(family, sol.eta)
    if isinstance(family, SimplexFamily):
        # the simplex lower bounds are stated for the objective itself
        lower_ok = None if lower is None else bool(sol.primal_objective >= lower - slack)
    else:
        lower_ok = None if lower is None else bool(g >= lower - slack)
    return BoundReport(
        **{**asdict(rep),
           "measured_gap": g,
           "measured_face_distance": dist,
           "lower_bound": lower,
           "slack": slack,
           "slow_ok": bool(g <= rep.slow_bound + slack),
           "fast_ok": None if rep.fast_bound is None else bool(g <= rep.fast_bound + slack),
           "face_ok": None if rep.face_distance_bound is None
           else bool(dist <= rep.face_distance_bound + slack),
           "lower_ok": lower_ok,
           "tau_ok": None if rep.tau_bound is None else bool(g <= rep.tau_bound + slack)},
    )
