"""
Solvers for the entropy-penalized program

    min  c'x - H(x) / eta   s.t.  Ax = b.

Three routes are provided: the closed-form Gibbs vector on a scaled
simplex, log-domain Sinkhorn scaling on the Birkhoff polytope, and damped
Newton ascent on the exponential-penalty dual for everything else. All
exponentials are formed from logarithms so that large ``eta`` does not
overflow.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import (
    AssignmentInstance,
    InstanceError,
    LpInstance,
    as_lp,
    detect_structure,
    entropy,
    reduce_rows,
)

log = logging.getLogger(__name__)

ROUTES = ("gibbs", "sinkhorn", "dual_ascent")

FEAS_TOL = 1e-8
GRAD_TOL = 1e-10
SINKHORN_MAX_ITER = 100_000
NEWTON_MAX_ITER = 200
AUTO_SINKHORN_MAX_ITER = 10_000

_EXP_MAX = 700.0


class SolverError(RuntimeError):
    """Raised when an iterative route fails; ``last`` holds the final iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PenalizedSolution:
    x_eta: np.ndarray
    eta: float
    primal_objective: float
    gap: float | None
    penalized_objective: float
    feasibility_residual: float
    iterations: int
    route: str
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "route": self.route,
            "eta": self.eta,
            "primal_objective": self.primal_objective,
            "gap": self.gap,
            "penalized_objective": self.penalized_objective,
            "feasibility_residual": self.feasibility_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "x_eta": self.x_eta.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ScalingState:
    """Log-domain diagonal scalings of the kernel ``exp(-eta C)``."""

    log_u: np.ndarray
    log_v: np.ndarray
    kernel_log: np.ndarray = field(repr=False)

    def log_plan(self) -> np.ndarray:
        return self.log_u[:, None] + self.kernel_log + self.log_v[None, :]

    def plan(self) -> np.ndarray:
        return np.exp(self.log_plan())


def marginal_error(state: ScalingState) -> float:
    """Largest deviation of the row and column sums of the scaled plan from 1."""
    X = state.plan()
    return float(max(np.max(np.abs(X.sum(axis=1) - 1.0)), np.max(np.abs(X.sum(axis=0) - 1.0))))


def _finish(lp: LpInstance, x, eta, iterations, route, optimal_value, converged=True):
    x = np.asarray(x, dtype=float)
    obj = float(lp.c @ x)
    resid = float(np.max(np.abs(lp.A @ x - lp.b)))
    return PenalizedSolution(
        x_eta=x,
        eta=float(eta),
        primal_objective=obj,
        gap=None if optimal_value is None else obj - float(optimal_value),
        penalized_objective=obj - entropy(x) / eta,
        feasibility_residual=resid,
        iterations=int(iterations),
        route=route,
        converged=converged,
    )


def _check_eta(eta):
    if not (eta > 0 and math.isfinite(eta)):
        raise ValueError(f"eta must be positive and finite, got {eta}")


# ---------------------------------------------------------------------------
# Gibbs


def gibbs_vector(c, eta: float, beta: float = 1.0) -> np.ndarray:
    """``beta * softmax(-eta c)`` computed through log-sum-exp."""
    z = -eta * np.asarray(c, dtype=float)
    return beta * np.exp(z - logsumexp(z))


def solve_gibbs(inst, eta: float, optimal_value: float | None = None) -> PenalizedSolution:
    """Exact penalized optimum when the only constraint is ``sum x_i = beta``."""
    _check_eta(eta)
    lp = as_lp(inst)
    kind = detect_structure(lp)
    if kind is None or kind[0] != "simplex":
        raise InstanceError("Gibbs route needs a single constraint of the form a * sum(x) = b")
    return _finish(lp, gibbs_vector(lp.c, eta, kind[1]), eta, 0, "gibbs", optimal_value)


# ---------------------------------------------------------------------------
# Sinkhorn


def _cost_matrix(inst) -> np.ndarray:
    if isinstance(inst, AssignmentInstance):
        return inst.C
    lp = as_lp(inst)
    kind = detect_structure(lp)
    if kind is None or kind[0] != "birkhoff":
        raise InstanceError("Sinkhorn route needs a Birkhoff-polytope instance")
    return lp.c.reshape(kind[1], kind[1])


def _lse_rows(M):
    m = M.max(axis=1)
    return m + np.log(np.exp(M - m[:, None]).sum(axis=1))


def solve_sinkhorn(
    inst,
    eta: float,
    tol: float = FEAS_TOL,
    max_iter: int = SINKHORN_MAX_ITER,
    optimal_value: float | None = None,
) -> tuple[PenalizedSolution, ScalingState]:
    """Penalized assignment plan by alternating row/column normalisation.

    Rows are normalised first, then columns, so after every sweep the column
    sums are exact and the stopping rule only has to look at the rows.
    If ``max_iter`` sweeps do not reach ``tol``, the last iterate is returned
    with ``converged=False`` and its marginal error as the residual.
    """
    _check_eta(eta)
    C = np.asarray(_cost_matrix(inst), dtype=float)
    n = C.shape[0]
    K = -eta * C
    log_v = np.zeros(n)
    log_u = -_lse_rows(K)
    err = math.inf
    it = 0
    while it < max_iter:
        it += 1
        log_v = -_lse_rows((K + log_u[:, None]).T)
        # log row sums of K diag(v); reused as the next row update
        r = _lse_rows(K + log_v[None, :])
        err = float(np.max(np.abs(np.expm1(log_u + r))))
        if err <= tol:
            break
        log_u = -r
    state = ScalingState(log_u, log_v, K)
    converged = err <= tol
    if not converged:
        warnings.warn(
            f"Sinkhorn stopped after {it} sweeps with marginal error {err:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    lp = as_lp(inst) if not isinstance(inst, AssignmentInstance) else inst.to_lp()
    sol = _finish(lp, state.plan().ravel(), eta, it, "sinkhorn", optimal_value, converged)
    return sol, state


# ---------------------------------------------------------------------------
# Dual Newton


class _Dual:
    """Scaled dual  phi(w) = b'w - sum_i exp(-eta c_i + (A'w)_i - 1),  w = eta y."""

    def __init__(self, A, b, c):
        self.A, self.b, self.c = A, b, c

    def logx(self, w, eta):
        return -eta * self.c + self.A.T @ w - 1.0

    def value(self, w, eta):
        s = self.logx(w, eta)
        if np.max(s) > _EXP_MAX:
            return -math.inf
        return float(self.b @ w - np.sum(np.exp(s)))

    def newton_direction(self, x, grad):
        H = (self.A * x) @ self.A.T
        try:
            d = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(d)) or grad @ d <= 0:
            return None
        return d


def _newton(dual: _Dual, w, eta, gtol, max_iter):
    """Damped Newton ascent at fixed eta. Returns (w, iterations, grad_norm)."""
    b = dual.b
    scale = max(1.0, float(np.max(np.abs(b))))
    for it in range(max_iter + 1):
        x = np.exp(dual.logx(w, eta))
        grad = b - dual.A @ x
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= gtol * scale or it == max_iter:
            return w, it, gnorm
        d = dual.newton_direction(x, grad)
        if d is None:
            log.debug("singular dual Hessian at eta=%g, taking a gradient step", eta)
            d = grad / max(1.0, float(np.max(np.abs(dual.A))) ** 2 * float(np.max(x)))
        slope = float(grad @ d)
        f0 = dual.value(w, eta)
        t = 1.0
        accepted = False
        for _ in range(60):
            w_new = w + t * d
            f1 = dual.value(w_new, eta)
            if f1 >= f0 + 1e-4 * t * slope:
                accepted = True
                break
            # f differences are below rounding: trust the full local step
            if slope <= 1e-13 * max(1.0, abs(f0)) and np.isfinite(f1):
                x1 = np.exp(dual.logx(w_new, eta))
                if np.max(np.abs(b - dual.A @ x1)) < gnorm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            return w, it, gnorm
        w = w_new
    return w, max_iter, gnorm


def solve_dual_ascent(
    inst,
    eta: float,
    tol: float = FEAS_TOL,
    grad_tol: float = GRAD_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    optimal_value: float | None = None,
) -> PenalizedSolution:
    """Penalized optimum of a general instance via its smooth concave dual.

    The dual of the penalized program is maximised over ``w = eta * y`` by
    damped Newton steps; the primal point is recovered from stationarity as
    ``x_i = exp(-eta c_i + (A'w)_i - 1)``. For large ``eta`` the solve is
    continued from a small ``eta`` along a doubling schedule with a tangent
    predictor, which keeps every Newton stage close to its optimum.

    Raises
    ------
    SolverError
        If the final feasibility residual exceeds ``tol``.
    """
    _check_eta(eta)
    lp = as_lp(inst)
    A, b = reduce_rows(lp)
    if A.shape[0] == 0:
        raise InstanceError("dual ascent needs at least one nonzero constraint row")
    # remove the part of c lying in the row space; it only shifts the dual
    y0, *_ = np.linalg.lstsq(A.T, lp.c, rcond=None)
    c = lp.c - A.T @ y0
    dual = _Dual(A, b, c)

    c_scale = float(np.max(np.abs(c)))
    eta0 = eta if c_scale == 0 else min(eta, 1.0 / c_scale)
    schedule = [eta0]
    while schedule[-1] < eta:
        schedule.append(min(eta, 2.0 * schedule[-1]))

    w = np.zeros(A.shape[0])
    # start at the point where x = exp(-1) * exp(-eta0 c) has the right total mass
    total = np.sum(np.exp(dual.logx(w, eta0)))
    y1, *_ = np.linalg.lstsq(A.T, np.ones(lp.n), rcond=None)
    if np.allclose(A.T @ y1, 1.0):
        mass = float(y1 @ b)
        if mass > 0:
            w = y1 * math.log(mass / total)

    iters = 0
    prev = None
    gnorm = math.inf
    for k, et in enumerate(schedule):
        if prev is not None:
            w_ok = w
            x = np.exp(dual.logx(w, prev))
            H = (A * x) @ A.T
            try:
                w = w + (et - prev) * np.linalg.solve(H, A @ (x * c))
            except np.linalg.LinAlgError:
                pass
            if not math.isfinite(dual.value(w, et)):
                w = w_ok
        last = k == len(schedule) - 1
        w, it, gnorm = _newton(dual, w, et, grad_tol if last else 1e-6, max_iter)
        iters += it
        prev = et

    x = np.exp(dual.logx(w, eta))
    sol = _finish(lp, x, eta, iters, "dual_ascent", optimal_value)
    if not sol.feasibility_residual <= tol * max(1.0, float(np.max(np.abs(lp.b)))):
        raise SolverError(
            f"dual ascent stalled at eta={eta:g}: residual {sol.feasibility_residual:.3e} "
            f"after {iters} Newton steps",
            last=sol,
        )
    return sol


def solve_max_entropy(inst) -> np.ndarray:
    """Maximum-entropy point of the feasible set (penalized optimum with c = 0)."""
    lp = as_lp(inst)
    return solve_dual_ascent(lp.with_cost(np.zeros(lp.n)), 1.0).x_eta


# ---------------------------------------------------------------------------


def select_route(inst) -> str:
    if isinstance(inst, AssignmentInstance):
        return "sinkhorn"
    kind = detect_structure(as_lp(inst))
    if kind is None:
        return "dual_ascent"
    return "gibbs" if kind[0] == "simplex" else "sinkhorn"


def solve(inst, eta: float, route: str = "auto", tol: float = FEAS_TOL, optimal_value=None) -> PenalizedSolution:
    """Dispatch to one of the three routes.

    ``auto`` picks Gibbs on simplices, Sinkhorn on Birkhoff polytopes and
    dual Newton otherwise. An automatic Sinkhorn solve that misses ``tol``
    within ``AUTO_SINKHORN_MAX_ITER`` sweeps is redone by dual Newton.
    """
    auto = route in ("auto", None)
    if auto:
        route = select_route(inst)
    if route == "dual":
        route = "dual_ascent"
    if route == "gibbs":
        return solve_gibbs(inst, eta, optimal_value=optimal_value)
    if route == "sinkhorn":
        if not auto:
            return solve_sinkhorn(inst, eta, tol=tol, optimal_value=optimal_value)[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            sol, _ = solve_sinkhorn(inst, eta, tol=tol, max_iter=AUTO_SINKHORN_MAX_ITER,
                                    optimal_value=optimal_value)
        if sol.converged:
            return sol
        log.info("Sinkhorn missed tol at eta=%g after %d sweeps; using dual Newton", eta, sol.iterations)
        route = "dual_ascent"
    if route == "dual_ascent":
        return solve_dual_ascent(inst, eta, tol=tol, optimal_value=optimal_value)
    raise ValueError(f"unknown route {route!r}")


def kkt_residual(inst, sol: PenalizedSolution) -> float:
    """Sup-norm residual of ``c + (log x + 1)/eta - A'y`` at the least-squares ``y``."""
    lp = as_lp(inst)
    with np.errstate(divide="ignore"):
        r = lp.c + (np.log(sol.x_eta) + 1.0) / sol.eta
    if not np.all(np.isfinite(r)):
        return math.inf
    y, *_ = np.linalg.lstsq(lp.A.T, r, rcond=None)
    return float(np.max(np.abs(lp.A.T @ y - r)))
