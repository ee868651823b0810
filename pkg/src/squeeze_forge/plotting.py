"""Figures rendered next to the CSV reports (Agg backend, byte-stable PNGs)."""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
FIG_WIDTH = 6.0

STYLE = {
    "figure.figsize": (FIG_WIDTH, FIG_WIDTH * GOLDEN),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "squeeze-forge",
}

# matplotlib stamps its version into PNG text chunks unless told otherwise
PNG_METADATA = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", metadata=PNG_METADATA)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def plot_curvature_profile(rows, bands, path, title: str = "") -> Path:
    """Principal curvature range against ``|x'|`` with the pinching band of each annulus.

    ``rows`` are ``(surface, radius, kappa_min, kappa_max)``; ``bands`` are
    ``(k, r_lo, r_hi, lower, upper)``.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        r = np.array([row[1] for row in rows], dtype=float)
        lo = np.array([row[2] for row in rows], dtype=float)
        hi = np.array([row[3] for row in rows], dtype=float)
        keep = r > 0
        for k, r_lo, r_hi, lower, upper in bands:
            a = max(r_lo, r[keep].min()) if keep.any() else r_lo
            ax.fill_between([a, r_hi], [lower, lower], [upper, upper], color="0.85", lw=0)
            ax.text(math.sqrt(a * r_hi), upper, f"k={k}", ha="center", va="bottom", fontsize=7)
        ax.plot(r[keep], lo[keep], color="C0", label="smallest principal curvature")
        ax.plot(r[keep], hi[keep], color="C3", label="largest principal curvature")
        ax.set_xscale("log")
        ax.set_xlabel("|x'|")
        ax.set_ylabel("curvature")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left")
        fig.tight_layout()
        return _save(fig, path)


def plot_bounds(ks, bounds, floors, path, title: str = "") -> Path:
    """Certified lower bound per shell together with the ``1 - 2m/(k+m)`` floor."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ks, bounds, "o-", color="C0", label="certified bound")
        ax.plot(ks, floors, "s--", color="C1", label="1 - 2m/(k+m)")
        ax.axhline(1.0, color="0.4", lw=0.8)
        ax.set_xlabel("stage k")
        ax.set_ylabel("lower bound on the squeezing function")
        ax.set_xticks(list(ks))
        if title:
            ax.set_title(title)
        ax.legend(loc="lower right")
        fig.tight_layout()
        return _save(fig, path)


def plot_convexity(details, path, title: str = "") -> Path:
    """Minimum midpoint clearance per sampling window (log scale; violations in red)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(FIG_WIDTH, max(2.5, 0.18 * len(details) + 1.0)))
        labels = [d["window"] for d in details]
        vals = np.array([d["min_clearance"] for d in details], dtype=float)
        bad = np.array([d["violations"] > 0 for d in details])
        mag = np.where(np.isfinite(vals) & (vals != 0.0), np.abs(vals), np.nan)
        y = np.arange(len(labels))
        ax.barh(y, mag, color=np.where(bad, "C3", "C2"))
        ax.set_yticks(y, labels, fontsize=6)
        ax.set_xscale("log")
        ax.invert_yaxis()
        ax.set_xlabel("|minimum midpoint clearance|")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
