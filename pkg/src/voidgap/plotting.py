"""Figures written next to the CSV outputs (non-interactive Agg backend)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def _eta_axis(ax):
    ticks = [0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi]
    ax.set_xticks(ticks)
    ax.set_xticklabels(["0", "π/2", "π", "3π/2", "2π"])
    ax.set_xlabel("η")


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_dispersion(etas, values, path, *, crossing: float | None = None,
                    title: str = "Unperturbed dispersion curves") -> Path:
    """Lattice values (one column per ordered branch) against ``eta``."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for k in range(values.shape[1]):
            ax.plot(etas, values[:, k], lw=1.4, label=f"Λ{k + 1}")
        if crossing is not None:
            ax.axhline(crossing, color="0.4", ls=":", lw=1)
        _eta_axis(ax)
        ax.set_ylabel("Λ")
        ax.set_title(title)
        ax.legend(fontsize=8, ncol=2)
        return _save(fig, path)


def plot_near_pi(psi, lower, upper, f0: float, path) -> Path:
    """The two corrections near the crossing as functions of ``psi``."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(psi, lower, label="Λ′₋(π, ψ)")
        ax.plot(psi, upper, label="Λ′₊(π, ψ)")
        ax.plot(psi, f0 - 2 * math.pi * np.abs(psi), color="0.6", ls="--", lw=0.8)
        ax.plot(psi, f0 + 2 * math.pi * np.abs(psi), color="0.6", ls="--", lw=0.8)
        ax.set_xlabel("ψ")
        ax.set_ylabel("correction")
        ax.set_title("Corrections near η = π")
        ax.legend()
        return _save(fig, path)


def plot_bands(etas, values, path, *, gap: tuple[float, float] | None = None,
               predicted: tuple[float, float] | None = None, epsilon: float | None = None) -> Path:
    """Computed band functions with the detected and predicted first gaps shaded."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for k in range(values.shape[1]):
            ax.plot(etas, values[:, k], "o-", ms=2.5, lw=1.0, label=f"band {k + 1}")
        if gap is not None:
            ax.axhspan(*gap, color="tab:green", alpha=0.2, label="detected gap")
        if predicted is not None:
            for v in predicted:
                ax.axhline(v, color="tab:red", ls="--", lw=0.9)
        _eta_axis(ax)
        ax.set_ylabel("Λᵋ")
        ax.set_title("Perturbed bands" + (f" (ε = {epsilon:g})" if epsilon is not None else ""))
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_epsilon_fit(fits, predictions, path) -> Path:
    """Measured shifts against ``eps^3`` with fitted and predicted slopes.

    ``fits`` is a sequence of fit results (``epsilons``, ``deviations``,
    ``slope``, ``branch``); ``predictions`` maps branch to predicted slope.
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for fit, color in zip(fits, ("tab:blue", "tab:orange", "tab:green", "tab:purple")):
            x = fit.epsilons ** 3
            xs = np.linspace(0, x.max() * 1.05, 50)
            ax.plot(x, fit.deviations, "o", color=color, label=f"branch {fit.branch} (oracle)")
            ax.plot(xs, fit.slope * xs, "-", color=color, lw=1)
            if fit.branch in predictions:
                ax.plot(xs, predictions[fit.branch] * xs, "--", color=color, lw=1,
                        label=f"branch {fit.branch} (asymptotic)")
        ax.axhline(0, color="0.3", lw=0.6)
        ax.set_xlabel("ε³")
        ax.set_ylabel("Λᵋ − Λ⁰")
        ax.set_title("Eigenvalue shift against ε³")
        ax.legend(fontsize=8)
        return _save(fig, path)
