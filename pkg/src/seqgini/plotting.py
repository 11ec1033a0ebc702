"""Figures written next to the delimited reports (PNG, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
}

# keep output bytes stable across runs
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_replications(report, path):
    """Final-size and width histograms of one Monte Carlo report."""
    n = np.array([r.final_n for r in report.records])
    w = np.array([r.width for r in report.records])
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
        a.hist(n, bins=30, color="0.4")
        if report.C:
            a.axvline(report.C, color="C3", ls="--", label="C")
            a.legend()
        a.set_xlabel("final cluster count")
        a.set_ylabel("replications")
        b.hist(w, bins=30, color="0.4")
        b.axvline(report.omega, color="C3", ls="--", label=r"$\omega$")
        b.set_xlabel("interval width")
        b.legend()
        fig.suptitle(f"{report.law}, {report.procedure}, {report.design}")
        fig.tight_layout()
        return _save(fig, path)


def plot_trajectory(outcome, path):
    """Sample size against the running target C_hat for one run."""
    t = np.array([row[:3] for row in outcome.trajectory], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t[:, 0], t[:, 2], color="C0", label=r"$\hat C$ at n")
        ax.plot(t[:, 0], t[:, 0], color="0.5", ls=":", label="n")
        ax.axvline(outcome.final_n, color="C3", ls="--", label=f"stop, N = {outcome.final_n}")
        ax.set_xlabel("clusters sampled")
        ax.set_ylabel("clusters required")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_fixed(result, omega, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(result.widths, bins=30, color="0.4")
        ax.axvline(omega, color="C3", ls="--", label=r"$\omega$")
        ax.set_xlabel(f"interval width, n = {result.n}")
        ax.set_ylabel("replications")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_lorenz(p, phi, path, g_hat=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.plot([0, 1], [0, 1], color="0.6", lw=0.8)
        ax.plot(p, phi, color="C0", label=None if g_hat is None else f"G = {g_hat:.4f}")
        ax.set_xlabel("population share")
        ax.set_ylabel("income share")
        ax.set_aspect("equal")
        if g_hat is not None:
            ax.legend(loc="upper left")
        fig.tight_layout()
        return _save(fig, path)


def plot_comparison(comparisons, path):
    """Fixed-n V^2 and sequential final sizes, proposed vs no sub-strata."""
    labels = [c.law for c in comparisons]
    x = np.arange(len(labels))
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
        v = np.array([c.fixed.mean_v2 for c in comparisons])
        a.bar(x - 0.2, v[:, 0], 0.4, label="sub-strata", color="C0")
        a.bar(x + 0.2, v[:, 1], 0.4, label="no sub-strata", color="0.6")
        a.set_xticks(x, labels, rotation=15)
        a.set_ylabel(f"mean $V^2$ at n = {comparisons[0].fixed.n_fixed}")
        a.legend()
        if all(c.sequential for c in comparisons):
            s = np.array([[r.mean_final_size for r in c.sequential] for c in comparisons])
            b.bar(x - 0.2, s[:, 0], 0.4, label="sub-strata", color="C0")
            b.bar(x + 0.2, s[:, 1], 0.4, label="no sub-strata", color="0.6")
            b.set_xticks(x, labels, rotation=15)
            b.set_ylabel("mean final size, sequential")
        fig.tight_layout()
        return _save(fig, path)
