"""Statistical checks tying the simulator to the closed-form limit theory.

Every check returns a small result object carrying the estimate, an error
band, and the closed-form target where one exists, so the runner can decide
pass/fail uniformly.  Two-scale trend checks (anti-clustering, mixing
residual) compare two configurations with propagated bands instead of
asserting an asymptotic limit directly: only the trend is falsifiable at
desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import branching, partial_sum, stable_law
from .branching import GWIModel, ThresholdTooHighError
from .heavy_tail import norming_sequence
from .partial_sum import block_sequence
from .stable_law import GeneralStableCF, StableParams


@dataclass
class CheckRow:
    """One verification statistic with its target and pass rule outcome."""

    check_id: str
    statistic: str
    estimate: float
    stderr: float
    target: float
    tolerance: float
    passed: bool
    seconds: float = 0.0


@dataclass
class VerificationReport:
    """Ordered collection of check rows."""

    rows: list[CheckRow] = field(default_factory=list)

    def add(self, row: CheckRow) -> None:
        self.rows.append(row)

    def extend(self, rows) -> None:
        self.rows.extend(rows)

    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def ecf_distance(samples, law: StableParams | GeneralStableCF,
                 theta_grid) -> tuple[float, float]:
    """Sup over the grid of |empirical CF - characteristic function|.

    Returns (distance, argmax theta).
    """
    grid = np.asarray(theta_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("theta grid must be non-empty")
    xs = np.asarray(samples, dtype=float)
    ecf = np.exp(1j * np.outer(grid, xs)).mean(axis=1)
    gaps = np.abs(ecf - stable_law.stable_cf(law, grid))
    top = int(np.argmax(gaps))
    return float(gaps[top]), float(grid[top])


def ks_distance(samples, law: StableParams) -> float:
    """Kolmogorov-Smirnov distance of a sample against the inverted CDF."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    if n == 0:
        raise ValueError("empty sample")
    cdf = stable_law.stable_cdf(law, xs)
    i = np.arange(1, n + 1)
    return float(max((i / n - cdf).max(), (cdf - (i - 1) / n).max()))


@dataclass(frozen=True)
class TwoScaleResult:
    """Estimates at a coarse and a fine configuration with error bands."""

    coarse: float
    coarse_band: float
    fine: float
    fine_band: float

    def decreased_beyond_bands(self) -> bool:
        return self.coarse - self.fine > self.coarse_band + self.fine_band


def anti_clustering_stat(model: GWIModel, n: int, d: int, x: float, reps: int,
                         rng: np.random.Generator,
                         centered: bool = False,
                         gamma2: float | None = None) -> tuple[float, float]:
    """n * sum_{j=d+1..m_n} E[(|X_j|/a_n ^ x)(|X_0|/a_n ^ x)] by Monte Carlo.

    ``centered`` switches to the mean-centered variant used above tail
    index 1.  Returns (estimate, standard error across replications).
    """
    if reps < 10_000:
        raise ValueError("need at least 1e4 replications")
    blocks = block_sequence(n, gamma2=gamma2, alpha=model.alpha)
    m_n = blocks.m_n
    if d >= m_n:
        raise ValueError(f"d={d} must be below the block length m_n={m_n}")
    a_n = norming_sequence(model, n)
    shift = partial_sum.stationary_mean(model) if centered else 0.0

    def clipped(states):
        return np.minimum(np.abs(states - shift) / a_n, x)

    states = branching.stationary_states(model, reps, rng)
    base = clipped(states)
    per_rep = np.zeros(reps)
    for j in range(1, m_n + 1):
        states = branching._step_states(model, states, rng)
        if j > d:
            per_rep += clipped(states) * base
    per_rep *= n
    est = float(per_rep.mean())
    se = float(per_rep.std(ddof=1) / math.sqrt(reps))
    return est, se


def anti_clustering_trend(model: GWIModel, n: int, d_small: int, d_large: int,
                          x: float, reps: int,
                          rng: np.random.Generator) -> TwoScaleResult:
    """Paired comparison of the anti-clustering statistic at two gap depths.

    Both depths are evaluated on the same simulated paths, so the difference
    (the summands for j in (d_small, d_large]) carries a much smaller error
    band than the two statistics individually.
    """
    if not 0 <= d_small < d_large:
        raise ValueError("need 0 <= d_small < d_large")
    blocks = block_sequence(n, alpha=model.alpha)
    m_n = blocks.m_n
    if d_large >= m_n:
        raise ValueError(f"d_large={d_large} must be below m_n={m_n}")
    a_n = norming_sequence(model, n)

    states = branching.stationary_states(model, reps, rng)
    base = np.minimum(states / a_n, x)
    tail_sum = np.zeros(reps)   # j > d_large
    mid_sum = np.zeros(reps)    # d_small < j <= d_large
    for j in range(1, m_n + 1):
        states = branching._step_states(model, states, rng)
        if j > d_large:
            tail_sum += np.minimum(states / a_n, x) * base
        elif j > d_small:
            mid_sum += np.minimum(states / a_n, x) * base
    small_stat = n * (mid_sum + tail_sum)
    large_stat = n * tail_sum
    return TwoScaleResult(
        coarse=float(small_stat.mean()),
        coarse_band=float(small_stat.std(ddof=1) / math.sqrt(reps)),
        fine=float(large_stat.mean()),
        fine_band=float(large_stat.std(ddof=1) / math.sqrt(reps)),
    )


def _ecf_with_se(values: np.ndarray, theta: float) -> tuple[complex, float]:
    z = np.exp(1j * theta * values)
    mean = complex(z.mean())
    se = math.hypot(float(z.real.std(ddof=1)), float(z.imag.std(ddof=1)))
    return mean, se / math.sqrt(values.size)


def mixing_residual(model: GWIModel, n: int, t: float, theta: float, reps: int,
                    rng: np.random.Generator,
                    gamma2: float | None = None) -> tuple[float, float]:
    """|cf of a_n^-1 S_floor(nt) - (cf of a_n^-1 S_m_n)^floor(floor(nt)/m_n)|.

    Both characteristic functions are estimated from independent Monte Carlo
    ensembles; returns the residual modulus and a first-order error band.
    """
    if reps < 10_000:
        raise ValueError("need at least 1e4 replications per CF")
    if theta == 0.0:
        return 0.0, 0.0
    blocks = block_sequence(n, gamma2=gamma2, alpha=model.alpha)
    m_n = blocks.m_n
    j_full = int(math.floor(n * t))
    power = j_full // m_n
    a_n = norming_sequence(model, n)
    full = branching.partial_sum_ensemble(model, [j_full], reps, rng)[:, 0] / a_n
    block = branching.partial_sum_ensemble(model, [m_n], reps, rng)[:, 0] / a_n
    cf_full, se_full = _ecf_with_se(full, theta)
    cf_block, se_block = _ecf_with_se(block, theta)
    residual = abs(cf_full - cf_block ** power)
    band = se_full + power * abs(cf_block) ** (power - 1) * se_block
    return float(residual), float(band)


def tail_process_check(model: GWIModel, x_threshold: float, k: int, reps: int,
                       rng: np.random.Generator) -> dict:
    """Conditional law of X_k / X_0 given X_0 above a high threshold.

    Returns median, interquartile range, hit count and the forward spectral
    tail target m^k.  The median is used instead of the mean because the
    conditioning leaves a heavy-tailed ratio below index 1.
    """
    if k < 0:
        raise ValueError("lag must be >= 0")
    paths = branching.path_matrix(model, k, reps, rng)
    hits = paths[:, 0] > x_threshold
    n_hits = int(hits.sum())
    if n_hits < 200:
        raise ThresholdTooHighError(
            f"only {n_hits} paths exceed the threshold; need >= 200"
        )
    ratios = paths[hits, k] / paths[hits, 0].astype(float)
    q25, q50, q75 = np.quantile(ratios, [0.25, 0.5, 0.75])
    return {
        "median": float(q50),
        "iqr": float(q75 - q25),
        "hits": n_hits,
        "target": stable_law.spectral_tail(model.offspring.mean, k),
    }


def b_plus_mc(model: GWIModel, d: int, n: int, reps: int,
              rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo n * P(window sum of d stationary values > a_n).

    Also asserts the negative-side analogue is identically zero (the window
    sums are non-negative).  Returns (estimate, standard error).
    """
    if d < 1:
        raise ValueError("window length d must be >= 1")
    a_n = norming_sequence(model, n)
    bp = stable_law.b_plus_sequence(model.offspring.mean, model.alpha, d)
    expected_hits = reps * bp.values[-1] / n
    if expected_hits < 100 - 1e-6:
        raise ThresholdTooHighError(
            f"expected hit count {expected_hits:.1f} < 100; raise reps"
        )
    sums = branching.partial_sum_ensemble(model, [d], reps, rng)[:, 0]
    # window of d consecutive stationary values
    freq = float(np.mean(sums > a_n))
    if np.any(sums <= -a_n):
        raise AssertionError("negative-side exceedance of a non-negative sum")
    se = n * math.sqrt(freq * (1.0 - freq) / reps)
    return n * freq, se


def centering_limit_check(model: GWIModel, n: int, t: float, reps: int,
                          rng: np.random.Generator) -> dict:
    """Scaled centering constants against their closed-form limits.

    Below tail index 1: floor(nt)/a_n * E(X_0; X_0 <= a_n) -> a/(1-a) t.
    Above: floor(nt)/a_n * E(X_0; X_0 > a_n) -> a/(a-1) t, estimated as the
    difference between the exact stationary mean and the truncated mean so
    the Monte Carlo summand stays bounded by a_n.
    """
    alpha = model.alpha
    a_n = norming_sequence(model, n)
    j = int(math.floor(n * t))
    chains = max(1000, reps // 300)
    trunc, se = partial_sum.truncated_mean(model, a_n, reps, rng, chains=chains)
    if alpha < 1.0:
        est = j * trunc / a_n
        band = j * se / a_n
        target = alpha / (1.0 - alpha) * t
    else:
        tail_mean = partial_sum.stationary_mean(model) - trunc
        est = j * tail_mean / a_n
        band = j * se / a_n
        target = alpha / (alpha - 1.0) * t
    return {"estimate": est, "stderr": band, "target": target}
