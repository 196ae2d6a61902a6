"""Figures for eta scans, written next to the CSV/JSON output."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "savefig.dpi": 150,
}


def _series(rows, key):
    xs, ys = [], []
    for r in rows:
        v = getattr(r, key)
        if v is not None and not r.error and v > 0 and math.isfinite(v):
            xs.append(r.eta)
            ys.append(v)
    return xs, ys


def plot_scan(result, path, title: str = "") -> Path:
    """Gap against eta on log axes, with the slow, fast and lower bounds.

    The dotted vertical line marks the fast-rate threshold ``(R1 + RH)/gap``.
    """
    path = Path(path)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for key, label, style in (
            ("gap", "measured gap", dict(marker="o", ms=3, lw=1.5, color="k")),
            ("slow_bound", "slow bound", dict(ls="--", color="tab:blue")),
            ("fast_bound", "fast bound", dict(ls="-", color="tab:red")),
            ("lower_bound", "lower bound", dict(ls=":", color="tab:green")),
        ):
            xs, ys = _series(result.rows, key)
            if xs:
                ax.plot(xs, ys, label=label, **style)
        thr = result.profile.fast_threshold
        etas = [r.eta for r in result.rows]
        if etas and min(etas) <= thr <= max(etas):
            ax.axvline(thr, color="0.5", ls=":", lw=1)
        ax.set_xscale("log" if len(etas) > 1 and min(etas) > 0 else "linear")
        ax.set_yscale("log")
        ax.set_xlabel(r"penalty weight $\eta$")
        ax.set_ylabel("objective gap")
        if title:
            ax.set_title(title)
        ax.legend(loc="lower left")
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
