"""Log-log figures of trajectory statistics, written next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _positive(k, y):
    k = np.asarray(k)
    y = np.asarray(y, dtype=float)
    keep = (k >= 1) & np.isfinite(y) & (y > 0)
    return k[keep], y[keep]


def plot_trajectory(stats, summary, path):
    """Mean and median alpha-norm error against round, with the fitted line."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        k, y = _positive(stats.rounds, stats.mean_alpha_err)
        ax.loglog(k, y, lw=1.2, label="trial mean")
        k, y = _positive(stats.rounds, stats.median_alpha_err)
        ax.loglog(k, y, lw=1.0, ls="--", label="trial median")
        fit = summary.get("fit") or {}
        if fit.get("slope") is not None:
            lo, hi = fit["fit_window"]
            kk = np.array([lo, hi], dtype=float)
            ax.loglog(kk, np.exp(fit["intercept"]) * kk ** fit["slope"], color="k", lw=0.8,
                      label=f"fit slope {fit['slope']:.3f}")
        bounds = (summary.get("bounds") or {}).get("gd_bound")
        if isinstance(bounds, list):
            ax.loglog(summary["bounds"]["k"], bounds, "v", color="C3", label="GD bound")
        ax.set_xlabel("round k")
        ax.set_ylabel(r"$\|w_k - w^*\|_\alpha^\alpha$")
        ax.set_title(f"alpha = {stats.alpha:g}")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, dpi=120, format="png")
        plt.close(fig)


def plot_sweep(axis, runs, path):
    """Overlay trial-mean curves; ``runs`` is a list of ``(value, stats)``."""
    label = {"alpha": r"$\alpha$", "N": "N", "rho": r"$\rho$", "beta": r"$\beta$"}.get(axis, axis)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for value, stats in runs:
            k, y = _positive(stats.rounds, stats.mean_alpha_err)
            ax.loglog(k, y, lw=1.1, label=f"{label} = {value:g}")
        ax.set_xlabel("round k")
        ax.set_ylabel(r"mean $\|w_k - w^*\|_\alpha^\alpha$")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, dpi=120, format="png")
        plt.close(fig)
