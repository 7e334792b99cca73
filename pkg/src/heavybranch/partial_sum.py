"""Scaled, centered partial-sum processes on time grids, and block scales.

Values at grid time t are ``(S_floor(nt) - c * floor(nt)) / a_n`` with
``S_j = X_1 + ... + X_j`` and ``S_0 = 0``.  Three centerings are supported:
none (tail index < 1 only), the full stationary mean (index > 1 only), and
the truncated mean ``E(X_0; X_0 <= a_n)`` which is valid for every index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import branching
from .branching import GWIModel, PathSample
from .heavy_tail import norming_sequence


class InfiniteMeanError(ValueError):
    """Raised when the stationary mean is requested below tail index 1."""


@dataclass(frozen=True)
class Centering:
    """Centering constant per time step: kind in {none, truncated, full}."""

    kind: str
    value: float = 0.0

    _KINDS = ("none", "truncated", "full")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown centering kind {self.kind!r}")
        if self.kind == "none" and self.value != 0.0:
            raise ValueError("no-centering carries no constant")

    @classmethod
    def none(cls) -> "Centering":
        return cls("none", 0.0)

    @classmethod
    def truncated(cls, value: float) -> "Centering":
        return cls("truncated", value)

    @classmethod
    def full(cls, value: float) -> "Centering":
        return cls("full", value)

    def validate_for(self, alpha: float) -> None:
        if self.kind == "none" and alpha >= 1.0:
            raise ValueError("uncentered sums diverge for tail index > 1")
        if self.kind == "full" and alpha <= 1.0:
            raise ValueError("full-mean centering needs a finite mean (index > 1)")


@dataclass(frozen=True)
class FidisGrid:
    """Strictly increasing positive time points t_1 < ... < t_d."""

    times: tuple[float, ...]

    def __post_init__(self) -> None:
        ts = self.times
        if len(ts) == 0:
            raise ValueError("grid must be non-empty")
        if ts[0] <= 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("grid times must be positive and strictly increasing")

    def indices(self, n: int) -> np.ndarray:
        return np.floor(n * np.asarray(self.times)).astype(np.int64)


@dataclass(frozen=True)
class ScaledFidis:
    """Scaled centered partial sums evaluated on a grid."""

    values: np.ndarray
    n: int
    a_n: float
    centering: Centering
    grid: FidisGrid


def truncated_mean(model: GWIModel, a_n: float, reps: int,
                   rng: np.random.Generator,
                   chains: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of E(X_0; X_0 <= a_n) with standard error.

    ``reps`` counts total stationary observations; with ``chains`` set they
    are collected along independent stationary chains (burn-in amortized),
    otherwise each observation is an independent fresh draw.
    """
    if reps < 1000:
        raise ValueError("need at least 1e3 replications")
    if a_n <= 0:
        return 0.0, 0.0
    if chains is None:
        chains = reps  # independent draws
    return branching.chain_mean(
        model, lambda s: np.where(s <= a_n, s, 0), reps, rng, chains=chains)


def stationary_mean(model: GWIModel) -> float:
    """Exact stationary mean E(eps) / (1 - m); infinite below tail index 1."""
    if model.alpha <= 1.0:
        raise InfiniteMeanError(
            f"stationary mean is infinite for tail index {model.alpha}"
        )
    return model.immigration.mean() / (1.0 - model.offspring.mean)


def resolve_centering(model: GWIModel, kind: str, a_n: float,
                      rng: np.random.Generator | None = None,
                      reps: int = 1_000_000,
                      chains: int | None = None) -> Centering:
    """Build a Centering with its constant estimated or computed for the model.

    The truncated-mean constant is estimated from a dedicated seed-separated
    sample, never from the paths being centered.
    """
    if kind == "none":
        c = Centering.none()
    elif kind == "full":
        c = Centering.full(stationary_mean(model))
    elif kind == "truncated":
        if rng is None:
            raise ValueError("truncated centering needs an rng for its estimate")
        est, _ = truncated_mean(model, a_n, reps, rng,
                                chains=chains if chains else max(1000, reps // 200))
        c = Centering.truncated(est)
    else:
        raise ValueError(f"unknown centering kind {kind!r}")
    c.validate_for(model.alpha)
    return c


def scaled_fidis(path: PathSample, n: int, a_n: float, centering: Centering,
                 grid: FidisGrid) -> ScaledFidis:
    """Evaluate the scaled centered partial-sum process of one path on a grid."""
    idx = grid.indices(n)
    if idx.max() + 1 > len(path.values):
        raise ValueError(
            f"grid needs {idx.max()} steps but the path has only "
            f"{len(path.values) - 1}"
        )
    csum = np.concatenate([[0.0], np.cumsum(path.values[1:], dtype=float)])
    vals = (csum[idx] - centering.value * idx) / a_n
    return ScaledFidis(values=vals, n=n, a_n=a_n, centering=centering, grid=grid)


def iterated_aggregate(model: GWIModel, n: int, copies: int,
                       centering: Centering, grid: FidisGrid,
                       rng: np.random.Generator) -> ScaledFidis:
    """Pool ``copies`` independent stationary paths and rescale the sums.

    Value at t: ``(sum_j S^(j)_floor(nt) - copies * c * floor(nt)) /
    (a_n * copies^(1/alpha))``.  Each copy runs on its own derived stream, so
    the reduction is independent of copy order.
    """
    if copies < 1:
        raise ValueError("need at least one copy")
    centering.validate_for(model.alpha)
    a_n = norming_sequence(model, n)
    idx = grid.indices(n)
    streams = rng.spawn(copies)
    pooled = np.zeros(len(idx))
    for child in streams:
        sums = branching.partial_sum_ensemble(model, idx, 1, child)[0]
        pooled += sums
    scale = a_n * copies ** (1.0 / model.alpha)
    vals = (pooled - copies * centering.value * idx) / scale
    return ScaledFidis(values=vals, n=n, a_n=a_n, centering=centering, grid=grid)


def fidis_ensemble(model: GWIModel, n: int, t: float, reps: int,
                   centering: Centering, rng: np.random.Generator,
                   copies: int = 1) -> np.ndarray:
    """Replicated scaled values at a single time, vectorized across paths.

    With ``copies > 1`` each replication pools that many independent paths
    (the iterated-aggregation workflow); the returned array has one scaled
    value per replication.
    """
    centering.validate_for(model.alpha)
    a_n = norming_sequence(model, n)
    j = int(math.floor(n * t))
    sums = branching.partial_sum_ensemble(model, [j], reps * copies, rng)[:, 0]
    if copies > 1:
        sums = sums.reshape(reps, copies).sum(axis=1)
    scale = a_n * copies ** (1.0 / model.alpha)
    return (sums - copies * centering.value * j) / scale


@dataclass(frozen=True)
class BlockSequence:
    """Block scales m_n = floor(n^g2), r_n = floor(n^g1) for the mixing bounds."""

    n: int
    gamma1: float
    gamma2: float
    m_n: int
    r_n: int


def gamma2_interval(alpha: float) -> tuple[float, float]:
    """Admissible open interval for the large-block exponent.

    Base constraint: (1/2, min(1/alpha, 1)); above index 1 the variance
    bound additionally needs g2 < 2/alpha - 1, which empties the interval
    outside (1, 4/3).
    """
    lo, hi = 0.5, min(1.0 / alpha, 1.0)
    if alpha > 1.0:
        hi = min(hi, 2.0 / alpha - 1.0)
    return lo, hi


def block_sequence(n: int, gamma1: float | None = None,
                   gamma2: float | None = None,
                   alpha: float = 0.5) -> BlockSequence:
    """Validated block scales; defaults pick the interval midpoint for g2.

    Raises ValueError when the constraint set is empty (all indices in
    [4/3, 2)) or the supplied exponents violate it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = gamma2_interval(alpha)
    if lo >= hi:
        raise ValueError(
            f"no admissible block exponent for tail index {alpha}: requires "
            f"1/2 < 2/alpha - 1, i.e. index in (1, 4/3)"
        )
    if gamma2 is None:
        gamma2 = 0.5 * (lo + hi)
    if gamma1 is None:
        gamma1 = gamma2 / 2.0
    problems = []
    if not lo < gamma2 < hi:
        problems.append(f"gamma2={gamma2} outside ({lo}, {hi:.6g})")
    if not 0.0 < gamma1 < gamma2:
        problems.append(f"gamma1={gamma1} outside (0, gamma2)")
    if problems:
        raise ValueError("; ".join(problems))
    return BlockSequence(n=n, gamma1=gamma1, gamma2=gamma2,
                         m_n=int(n ** gamma2), r_n=int(n ** gamma1))
