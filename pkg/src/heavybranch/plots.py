"""Figure rendering for the report path (PNG files next to the CSV tables)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import stable_law
from .stable_law import StableParams

_DPI = 110


def _save(fig, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.png")
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def ecdf_vs_cdf(samples, params: StableParams, out_dir: str, name: str,
                title: str = "") -> str:
    """Empirical CDF of the sample against the inverted limit CDF."""
    xs = np.sort(np.asarray(samples, dtype=float))
    sub = xs[:: max(1, xs.size // 4000)]
    ecdf = np.searchsorted(xs, sub, side="right") / xs.size
    cdf = stable_law.stable_cdf(params, sub)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sub, ecdf, lw=1.2, label="empirical")
    ax.plot(sub, cdf, lw=1.2, ls="--", label="limit law")
    lo, hi = np.quantile(xs, [0.001, 0.999])
    ax.set_xlim(lo, hi)
    ax.set_xlabel("x")
    ax.set_ylabel("F(x)")
    ax.set_title(title or name)
    ax.legend()
    return _save(fig, out_dir, name)


def ecf_gap(samples, law, theta_grid, out_dir: str, name: str) -> str:
    """Gap |empirical CF - model CF| across the frequency grid."""
    grid = np.asarray(theta_grid, dtype=float)
    xs = np.asarray(samples, dtype=float)
    ecf = np.exp(1j * np.outer(grid, xs)).mean(axis=1)
    gap = np.abs(ecf - stable_law.stable_cf(law, grid))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(grid, gap, marker="o", ms=3, lw=1.0)
    ax.set_xlabel("theta")
    ax.set_ylabel("|ECF - CF|")
    ax.set_title(name)
    return _save(fig, out_dir, name)


def b_plus_increments(seq, out_dir: str, name: str) -> str:
    """Window-sum tail increments against their limit K."""
    d = np.arange(1, len(seq.values) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(d, seq.increments, marker="o", ms=4, lw=1.0, label="increment")
    ax.axhline(seq.c_plus, color="k", ls=":", lw=1.0, label="limit K")
    ax.set_xlabel("window length d")
    ax.set_ylabel("b(d) - b(d-1)")
    ax.set_title(name)
    ax.legend()
    return _save(fig, out_dir, name)


def two_scale(labels, estimates, bands, out_dir: str, name: str,
              ylabel: str = "estimate") -> str:
    """Coarse-vs-fine trend with error bars."""
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(x, estimates, yerr=bands, fmt="o", capsize=4)
    ax.set_xticks(x, labels)
    ax.set_ylabel(ylabel)
    ax.set_title(name)
    return _save(fig, out_dir, name)


def path_plot(values, out_dir: str, name: str) -> str:
    """A single trajectory (log scale above 1)."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(np.arange(len(values)), values, lw=0.8)
    ax.set_yscale("symlog", linthresh=1.0)
    ax.set_xlabel("k")
    ax.set_ylabel("X_k")
    ax.set_title(name)
    return _save(fig, out_dir, name)
