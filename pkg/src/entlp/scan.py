"""eta scans: one solve per grid point, rows carrying measured gaps and bounds."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds
from .model import AssignmentInstance, SimplexFamily, as_lp, instance_to_dict, profile
from .solver import solve

CSV_HEADER = ["eta", "objective", "gap", "slow_bound", "fast_bound", "face_dist",
              "face_bound", "lower_bound", "iters", "route"]


@dataclass(frozen=True)
class EtaGrid:
    start: float
    stop: float
    count: int
    spacing: str = "log"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("eta grid needs count >= 1")
        if not (self.start > 0 and self.stop > 0):
            raise ValueError("eta grid bounds must be positive")
        if self.start > self.stop:
            raise ValueError("eta grid needs start <= stop")
        if self.spacing not in ("log", "lin"):
            raise ValueError("eta grid spacing must be 'log' or 'lin'")

    @classmethod
    def parse(cls, text: str) -> "EtaGrid":
        """Parse ``start:stop:count[:log|lin]``."""
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ValueError(f"bad eta grid {text!r}; expected start:stop:count:log|lin")
        spacing = parts[3] if len(parts) == 4 else "log"
        return cls(float(parts[0]), float(parts[1]), int(parts[2]), spacing)

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class ScanConfig:
    instance: object
    grid: EtaGrid
    route: str = "auto"
    tol: float = 1e-8
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1
    label: str = ""


@dataclass
class ScanRow:
    eta: float
    objective: float | None = None
    gap: float | None = None
    slow_bound: float | None = None
    fast_bound: float | None = None
    face_dist: float | None = None
    face_bound: float | None = None
    lower_bound: float | None = None
    iters: int | None = None
    route: str = ""
    error: str = ""


@dataclass
class ScanResult:
    rows: list
    profile: object = field(repr=False)
    family: object = None

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.error]


def _row(inst, prof, family, eta, route, tol) -> ScanRow:
    try:
        sol = solve(inst, eta, route=route, tol=tol, optimal_value=prof.optimal_value)
    except Exception as exc:  # recorded per row; the scan keeps going
        return ScanRow(eta=float(eta), error=f"{type(exc).__name__}: {exc}")
    return ScanRow(
        eta=float(eta),
        objective=sol.primal_objective,
        gap=sol.gap,
        slow_bound=bounds.slow_bound(prof, eta),
        fast_bound=bounds.fast_bound(prof, eta),
        face_dist=bounds.face_distance(prof, sol.x_eta),
        face_bound=bounds.face_distance_bound(prof, eta),
        lower_bound=bounds.family_lower_bound(family, eta),
        iters=sol.iterations,
        route=sol.route,
    )


def run_scan(cfg: ScanConfig, prof=None) -> ScanResult:
    """Solve at every grid point; output order follows the grid regardless of workers."""
    inst = cfg.instance
    prof = prof if prof is not None else profile(inst)
    family = bounds.detect_family(inst)
    etas = cfg.grid.values()
    work = lambda eta: _row(inst, prof, family, float(eta), cfg.route, cfg.tol)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(work, etas))
    else:
        rows = [work(e) for e in etas]
    return ScanResult(rows=rows, profile=prof, family=family)


def fmt_float(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def rows_to_csv(rows) -> str:
    """CSV text with 17 significant digits; missing values are empty cells.

    An ``error`` column is appended only when some row failed.
    """
    header = list(CSV_HEADER)
    with_error = any(r.error for r in rows)
    if with_error:
        header.append("error")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        rec = [fmt_float(getattr(r, k)) if k not in ("route", "error") else getattr(r, k)
               for k in header]
        w.writerow(rec)
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def result_to_json(result: ScanResult, instance) -> str:
    doc = {
        "instance": instance_to_dict(instance),
        "profile": result.profile.to_dict(),
        "rows": [{k: _jsonable(v) for k, v in asdict(r).items()} for r in result.rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def family_label(inst) -> str:
    if isinstance(inst, SimplexFamily):
        return f"simplex d={inst.d} alpha={inst.alpha:g} beta={inst.beta:g}"
    if isinstance(inst, AssignmentInstance):
        return f"assignment n={inst.n}"
    lp = as_lp(inst)
    return f"LP n={lp.n} m={lp.m}"
