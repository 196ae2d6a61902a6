"""
LP instances, entropy functions and exact polytope analysis.

Feasible sets are always in standard form ``{x : Ax = b, x >= 0}``. The
structural constants of a polytope (suboptimality gap, l1 radius and
entropic radius) are computed from its full vertex list, so everything in
this module is meant for small instances.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.special import entr, xlogy

DEDUP_TOL = 1e-9
RANK_TOL = 1e-10
FEAS_TOL = 1e-9
MAX_ENUM_COLUMNS = 14


class InstanceError(ValueError):
    """Raised when an LP instance violates the standing assumptions."""


class EnumerationBudgetError(InstanceError):
    """Raised when basis enumeration would exceed the column budget."""


# ---------------------------------------------------------------------------
# Entropy


def entropy(x) -> float:
    """Shannon entropy ``sum_i x_i log(1/x_i)`` with ``0 log(1/0) = 0``.

    ``x`` need not sum to one.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("entropy: entries must be finite")
    if np.any(x < 0):
        raise ValueError("entropy: entries must be nonnegative")
    return float(np.sum(entr(x)))


def binary_entropy(lam: float) -> float:
    """h(lam) = lam log(1/lam) + (1 - lam) log(1/(1 - lam)) on [0, 1]."""
    lam = float(lam)
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"binary_entropy: {lam} outside [0, 1]")
    return float(binary_entropy_array(lam)) + 0.0


def binary_entropy_array(lam):
    """Vectorised :func:`binary_entropy` without range checks."""
    lam = np.asarray(lam, dtype=float)
    # log1p keeps the (1 - lam) term accurate for lam near 0
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(lam < 1.0, (1.0 - lam) * np.log1p(-lam), 0.0)
    return -xlogy(lam, lam) - tail


# ---------------------------------------------------------------------------
# Instances


@dataclass(frozen=True, eq=False)
class LpInstance:
    """Standard-form LP ``min c'x  s.t.  Ax = b, x >= 0``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    integral_cost: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if A.ndim != 2 or b.ndim != 1 or c.ndim != 1:
            raise InstanceError("A must be a matrix, b and c vectors")
        m, n = A.shape
        if m < 1 or n < 1:
            raise InstanceError("need at least one row and one column")
        if b.shape != (m,) or c.shape != (n,):
            raise InstanceError(
                f"shape mismatch: A is {A.shape}, b has {b.size}, c has {c.size}"
            )
        for name, arr in (("A", A), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise InstanceError(f"{name} has non-finite entries")
        for name, arr in (("A", A), ("b", b), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.integral_cost and not np.all(c == np.round(c)):
            raise InstanceError("integral_cost is set but c has non-integer entries")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def with_cost(self, c) -> "LpInstance":
        return LpInstance(self.A, self.b, c, integral_cost=False)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "integral_cost": bool(self.integral_cost),
        }


@dataclass(frozen=True)
class SimplexFamily:
    """Scaled simplex ``sum x_i = beta`` with cost ``(0, alpha, ..., alpha)``."""

    d: int
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InstanceError("simplex family needs integer d >= 2")
        if not (self.alpha > 0 and self.beta > 0):
            raise InstanceError("simplex family needs alpha > 0 and beta > 0")

    @property
    def cost(self) -> np.ndarray:
        c = np.full(self.d, float(self.alpha))
        c[0] = 0.0
        return c

    def to_lp(self) -> LpInstance:
        return LpInstance(np.ones((1, self.d)), [float(self.beta)], self.cost)

    # closed forms for the structural constants
    @property
    def gap(self) -> float:
        return self.alpha * self.beta

    @property
    def l1_radius(self) -> float:
        return float(self.beta)

    @property
    def entropic_radius(self) -> float:
        return self.beta * math.log(self.d)


def birkhoff_constraints(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-sum and column-sum constraints on a row-major flattened n x n matrix."""
    A = np.zeros((2 * n, n * n))
    for i in range(n):
        A[i, i * n:(i + 1) * n] = 1.0
        A[n + i, i::n] = 1.0
    return A, np.ones(2 * n)


@dataclass(frozen=True, eq=False)
class AssignmentInstance:
    """Assignment problem with an n x n cost matrix over the Birkhoff polytope."""

    C: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] < 1:
            raise InstanceError("assignment cost must be a nonempty square matrix")
        if not np.all(np.isfinite(C)):
            raise InstanceError("assignment cost has non-finite entries")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def integral(self) -> bool:
        return bool(np.all(self.C == np.round(self.C)))

    def to_lp(self) -> LpInstance:
        A, b = birkhoff_constraints(self.n)
        return LpInstance(A, b, self.C.ravel(), integral_cost=self.integral)


def as_lp(inst) -> LpInstance:
    if isinstance(inst, LpInstance):
        return inst
    return inst.to_lp()


def detect_structure(inst: LpInstance):
    """Recognise scaled simplices and Birkhoff polytopes from the constraints.

    Returns ``("simplex", beta)``, ``("birkhoff", n)`` or ``None``.
    """
    A, b = inst.A, inst.b
    if inst.m == 1:
        a = A[0, 0]
        if a != 0 and np.all(A[0] == a) and b[0] / a > 0:
            return "simplex", float(b[0] / a)
        return None
    k = int(round(math.sqrt(inst.n)))
    if k * k == inst.n and inst.m == 2 * k:
        Ab, bb = birkhoff_constraints(k)
        if np.array_equal(A, Ab) and np.array_equal(b, bb):
            return "birkhoff", k
    return None


# ---------------------------------------------------------------------------
# Linear algebra helpers


def independent_rows(A: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Indices of a maximal linearly independent set of rows of ``A``."""
    if not np.any(A):
        return np.array([], dtype=int)
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def reduce_rows(inst: LpInstance, tol: float = FEAS_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Drop redundant equality rows; raise if the dropped rows are inconsistent."""
    rows = independent_rows(inst.A)
    Ar, br = inst.A[rows], inst.b[rows]
    if rows.size < inst.m:
        # dropped rows must be combinations of the kept ones, rhs included
        coef, *_ = np.linalg.lstsq(Ar.T, inst.A.T, rcond=None)
        scale = max(1.0, float(np.max(np.abs(inst.b))))
        if np.max(np.abs(coef.T @ br - inst.b)) > tol * scale:
            raise InstanceError("constraints are inconsistent: P is empty")
    return Ar, br


# ---------------------------------------------------------------------------
# Vertices


def _basic_solutions(A: np.ndarray, b: np.ndarray, tol: float, max_columns: int):
    m, n = A.shape
    if n > max_columns:
        raise EnumerationBudgetError(
            f"basis enumeration over {n} columns exceeds the budget of {max_columns}"
        )
    found = []
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        s = np.linalg.svd(B, compute_uv=False)
        if s[-1] <= RANK_TOL * max(s[0], 1.0):
            continue
        xb = np.linalg.solve(B, b)
        if np.any(xb < -tol):
            continue
        x = np.zeros(n)
        x[list(cols)] = np.maximum(xb, 0.0)
        found.append(x)
    return found


def _dedupe(points, tol: float) -> list[np.ndarray]:
    pts = sorted(points, key=lambda v: tuple(np.round(v, 12)))
    out: list[np.ndarray] = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    return out


def enumerate_vertices(
    inst, tol: float = DEDUP_TOL, max_columns: int = MAX_ENUM_COLUMNS
) -> list[np.ndarray]:
    """All basic feasible solutions of ``{Ax = b, x >= 0}``.

    Every subset of ``rank(A)`` columns is tried, so the cost grows as
    ``binom(n, rank)``; instances with more than ``max_columns`` variables
    are refused. Output is deduplicated in the sup norm and sorted
    lexicographically.
    """
    inst = as_lp(inst)
    Ar, br = reduce_rows(inst)
    if Ar.shape[0] == 0:
        if np.any(inst.b != 0):
            raise InstanceError("constraints are inconsistent: P is empty")
        # A = 0, b = 0: only the origin is a vertex of the nonnegative orthant
        return [np.zeros(inst.n)]
    verts = _basic_solutions(Ar, br, FEAS_TOL, max_columns)
    verts = [v for v in verts if np.max(np.abs(inst.A @ v - inst.b)) <= 1e-7 * max(1.0, np.max(np.abs(inst.b)))]
    if not verts:
        raise InstanceError("no basic feasible solution: P is empty")
    return _dedupe(verts, tol)


def permutation_matrices(n: int) -> list[np.ndarray]:
    """Flattened n x n permutation matrices, in lexicographic order."""
    out = []
    for perm in itertools.permutations(range(n)):
        P = np.zeros((n, n))
        P[np.arange(n), perm] = 1.0
        out.append(P.ravel())
    out.sort(key=tuple)
    return out


def polytope_vertices(inst, max_columns: int = MAX_ENUM_COLUMNS) -> list[np.ndarray]:
    """Vertex set, using closed forms for simplices and Birkhoff polytopes."""
    lp = as_lp(inst)
    kind = detect_structure(lp)
    if kind is not None and kind[0] == "simplex":
        beta = kind[1]
        return _dedupe([beta * e for e in np.eye(lp.n)], DEDUP_TOL)
    if kind is not None and kind[0] == "birkhoff":
        return permutation_matrices(kind[1])
    return enumerate_vertices(lp, max_columns=max_columns)


def is_bounded(inst, max_columns: int = MAX_ENUM_COLUMNS) -> bool:
    """Whether ``{Ax = b, x >= 0}`` has no recession direction.

    First tries the cheap certificate ``A'y = 1`` (then ``1'x`` is fixed on
    P). Otherwise enumerates extreme rays, i.e. vertices of
    ``{Ad = 0, 1'd = 1, d >= 0}``; P is bounded iff there are none.
    """
    lp = as_lp(inst)
    A = lp.A
    if np.all(np.any(A != 0, axis=0)):
        y, *_ = np.linalg.lstsq(A.T, np.ones(lp.n), rcond=None)
        if np.max(np.abs(A.T @ y - 1.0)) <= 1e-9:
            return True
    ray_sys = LpInstance(np.vstack([A, np.ones(lp.n)]), np.r_[np.zeros(lp.m), 1.0], np.zeros(lp.n))
    try:
        enumerate_vertices(ray_sys, max_columns=max_columns)
    except EnumerationBudgetError:
        raise
    except InstanceError:
        return True
    return False


def validate(inst, max_columns: int = MAX_ENUM_COLUMNS) -> LpInstance:
    """Check the standing assumptions: P nonempty and bounded, c'x not constant on P."""
    lp = as_lp(inst)
    if detect_structure(lp) is None and not is_bounded(lp, max_columns):
        raise InstanceError("feasible set is unbounded")
    verts = polytope_vertices(lp, max_columns)
    vals = np.array([lp.c @ v for v in verts])
    if np.ptp(vals) <= 1e-12 * max(1.0, np.max(np.abs(vals))):
        raise InstanceError("objective is constant over the feasible set")
    return lp


# ---------------------------------------------------------------------------
# Profile


@dataclass(frozen=True, eq=False)
class PolytopeProfile:
    vertices: list
    values: np.ndarray
    optimal_value: float
    optimal: tuple
    suboptimal: tuple
    gap: float
    l1_radius: float
    entropic_radius: float
    max_entropy_point: np.ndarray
    cost: np.ndarray = field(repr=False)

    @property
    def fast_threshold(self) -> float:
        return (self.l1_radius + self.entropic_radius) / self.gap

    @property
    def optimal_vertices(self) -> list:
        return [self.vertices[i] for i in self.optimal]

    def to_dict(self) -> dict:
        return {
            "n_vertices": len(self.vertices),
            "optimal_value": self.optimal_value,
            "n_optimal": len(self.optimal),
            "gap": self.gap,
            "l1_radius": self.l1_radius,
            "entropic_radius": self.entropic_radius,
            "fast_threshold": self.fast_threshold,
            "max_entropy_point": self.max_entropy_point.tolist(),
        }


def _default_max_entropy(lp: LpInstance) -> np.ndarray:
    from .solver import solve_max_entropy

    return solve_max_entropy(lp)


def profile(
    inst,
    solver_handle: Callable[[LpInstance], np.ndarray] | None = None,
    max_columns: int = MAX_ENUM_COLUMNS,
    value_tol: float = 1e-9,
) -> PolytopeProfile:
    """Vertices, gap, l1 radius and entropic radius of an instance.

    Parameters
    ----------
    inst : LpInstance, SimplexFamily or AssignmentInstance
    solver_handle : callable, optional
        Maps an instance to the maximum-entropy point of its feasible set.
        Defaults to dual Newton on the penalized program with zero cost.
    value_tol : float
        Vertices whose objective is within this (relative) tolerance of the
        minimum are treated as optimal.
    """
    lp = as_lp(inst)
    verts = polytope_vertices(lp, max_columns)
    vals = np.array([float(lp.c @ v) for v in verts])
    vmin = float(vals.min())
    tol = value_tol * max(1.0, float(np.max(np.abs(vals))))
    opt = tuple(int(i) for i in np.flatnonzero(vals <= vmin + tol))
    sub = tuple(int(i) for i in np.flatnonzero(vals > vmin + tol))
    if not sub:
        raise InstanceError("objective is constant over the feasible set")
    gap = float(vals[list(sub)].min() - vmin)
    r1 = float(max(np.sum(np.abs(v)) for v in verts))
    x_me = (solver_handle or _default_max_entropy)(lp)
    h_min = min(entropy(v) for v in verts)
    r_h = max(entropy(x_me) - h_min, 0.0)
    values = vals.copy()
    values.setflags(write=False)
    return PolytopeProfile(
        vertices=verts,
        values=values,
        optimal_value=vmin,
        optimal=opt,
        suboptimal=sub,
        gap=gap,
        l1_radius=r1,
        entropic_radius=r_h,
        max_entropy_point=np.asarray(x_me, dtype=float),
        cost=lp.c,
    )


def tau_gap(prof: PolytopeProfile, tau: float) -> tuple[float, tuple]:
    """Gap between the tau-near-optimal vertices and the rest.

    Returns ``(delta_tau, O_tau)``; ``delta_tau`` is ``inf`` when every vertex
    is within ``tau`` of optimal.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    vals = prof.values
    near = vals - prof.optimal_value <= tau
    o_tau = tuple(int(i) for i in np.flatnonzero(near))
    if np.all(near):
        return math.inf, o_tau
    return float(vals[~near].min() - vals[near].max()), o_tau


# ---------------------------------------------------------------------------
# Instance files


def parse_instance(doc: dict):
    """Build an instance from the JSON document schema.

    Accepted forms are ``{"A", "b", "c", "integral_cost"}``,
    ``{"simplex": {"d", "alpha", "beta"}}`` and ``{"assignment": {"C"}}``.
    """
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a JSON object")
    if "simplex" in doc:
        s = doc["simplex"]
        return SimplexFamily(int(s["d"]), float(s.get("alpha", 1.0)), float(s.get("beta", 1.0)))
    if "assignment" in doc:
        return AssignmentInstance(np.asarray(doc["assignment"]["C"], dtype=float))
    missing = [k for k in ("A", "b", "c") if k not in doc]
    if missing:
        raise InstanceError(f"instance document lacks keys {missing}")
    return LpInstance(
        np.asarray(doc["A"], dtype=float),
        np.asarray(doc["b"], dtype=float),
        np.asarray(doc["c"], dtype=float),
        integral_cost=bool(doc.get("integral_cost", False)),
    )


def load_instance(path: str | Path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"cannot read instance file {path}: {exc}") from exc
    try:
        return parse_instance(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"malformed instance file {path}: {exc}") from exc


def instance_to_dict(inst) -> dict:
    if isinstance(inst, SimplexFamily):
        return {"simplex": {"d": inst.d, "alpha": inst.alpha, "beta": inst.beta}}
    if isinstance(inst, AssignmentInstance):
        return {"assignment": {"C": inst.C.tolist()}}
    return inst.to_dict()


def random_instance(rng: np.random.Generator, n: int, m: int, integral_cost: bool = False) -> LpInstance:
    """Random bounded, feasible instance with ``n`` variables and ``m`` rows.

    The first row has positive entries, which bounds P; ``b`` is the image of
    a strictly positive point, which makes P nonempty with interior.
    """
    A = rng.uniform(-1.0, 1.0, size=(m, n))
    A[0] = rng.uniform(0.5, 1.5, size=n)
    x0 = rng.uniform(0.2, 1.0, size=n)
    b = A @ x0
    if integral_cost:
        c = rng.integers(0, 5, size=n).astype(float)
    else:
        c = rng.uniform(0.0, 1.0, size=n)
    return LpInstance(A, b, c, integral_cost=integral_cost)


def vertex_entropies(verts: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([entropy(v) for v in verts])
