"""Regularly varying integer laws, norming sequences, and tail diagnostics.

The immigration law used throughout is the floored Pareto ``eps = floor(U^(-1/alpha))``
with ``U`` uniform on (0, 1], which has the exactly power-law tail
``P(eps > k) = (k + 1)^(-alpha)`` for integer ``k >= 0``.  The constant slowly
varying part makes every downstream closed form exact, so Monte Carlo checks
can be pinned against arithmetic instead of asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Summation cap for truncated moments; beyond it the remaining power tail is
# handled by a midpoint integral approximation.
_MOMENT_SUM_CAP = 10_000_000

# Immigration draws are clipped here before the int64 cast.  A draw this large
# has probability < 1e-9 per run at our sample sizes, and clipped values only
# occur far above any truncation level used by the statistics.
_INT64_SAFE = 4.6e18


class DegenerateSampleError(ValueError):
    """Raised when tied order statistics make the tail-index estimator undefined."""


class InsufficientSampleError(ValueError):
    """Raised when an empirical quantile is requested from too small a sample."""


@dataclass(frozen=True)
class ImmigrationLaw:
    """Floored-Pareto immigration law with tail index ``alpha`` in (0, 2).

    Model-level workflows restrict ``alpha`` further (no 1, below 4/3); the
    wider range stays available here for diagnostics such as tail-index
    estimation on laws outside the limit-theorem window.
    """

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"tail index must lie in (0, 2), got {self.alpha}")

    def tail(self, x) -> np.ndarray | float:
        """P(eps > x) = (floor(x) + 1)^(-alpha) for real x >= 0."""
        xs = np.asarray(x, dtype=float)
        if np.any(xs < 0):
            raise ValueError("tail evaluated at negative threshold")
        out = (np.floor(xs) + 1.0) ** (-self.alpha)
        return float(out) if np.isscalar(x) or xs.ndim == 0 else out

    def from_uniform(self, u):
        """Inverse-transform map floor(u^(-1/alpha)) for u in (0, 1]."""
        us = np.asarray(u, dtype=float)
        if np.any(us <= 0.0) or np.any(us > 1.0):
            raise ValueError("uniform variate must lie in (0, 1]")
        raw = np.minimum(us ** (-1.0 / self.alpha), _INT64_SAFE)
        if np.isscalar(u) or us.ndim == 0:
            return int(raw)
        return raw.astype(np.int64)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw by inverse transform applied to U uniform on (0, 1]."""
        return self.from_uniform(1.0 - rng.random(size))

    def pmf(self, k) -> np.ndarray | float:
        ks = np.asarray(k, dtype=float)
        return ks ** (-self.alpha) - (ks + 1.0) ** (-self.alpha)

    def truncated_moment(self, beta: float, x: float) -> float:
        """E(eps^beta 1{eps <= x}) by exact summation over the integer support."""
        if beta <= 0:
            raise ValueError("moment order must be positive")
        if x < 1:
            return 0.0
        top = int(math.floor(x))
        capped = min(top, _MOMENT_SUM_CAP)
        total = _moment_sum(self.alpha, beta, 1, capped)
        if top > capped:
            total += _moment_tail_integral(self.alpha, beta, capped, top)
        return total

    def moment(self, beta: float) -> float:
        """E(eps^beta), finite only for beta < alpha."""
        if beta <= 0:
            raise ValueError("moment order must be positive")
        if beta >= self.alpha:
            raise ValueError(
                f"moment of order {beta} diverges for tail index {self.alpha}"
            )
        total = _moment_sum(self.alpha, beta, 1, _MOMENT_SUM_CAP)
        return total + _moment_tail_integral(self.alpha, beta, _MOMENT_SUM_CAP, None)

    def mean(self) -> float:
        """E(eps) = sum_{j>=1} j^(-alpha); finite only for alpha > 1."""
        if self.alpha <= 1:
            raise ValueError("immigration mean is infinite for tail index <= 1")
        # Partial zeta sum plus Euler-Maclaurin remainder of the power tail.
        m = 1_000_000
        j = np.arange(1, m, dtype=float)
        head = float(np.sum(j ** (-self.alpha)))
        a = self.alpha
        rem = m ** (1 - a) / (a - 1) + 0.5 * m ** (-a) + a / 12.0 * m ** (-a - 1)
        return head + rem


def _moment_sum(alpha: float, beta: float, lo: int, hi: int) -> float:
    """sum_{k=lo..hi} k^beta * P(eps = k), chunked to bound memory."""
    total = 0.0
    chunk = 2_000_000
    for start in range(lo, hi + 1, chunk):
        stop = min(start + chunk - 1, hi)
        k = np.arange(start, stop + 1, dtype=float)
        total += float(np.sum(k ** beta * (k ** -alpha - (k + 1.0) ** -alpha)))
    return total


def _moment_tail_integral(alpha: float, beta: float, lo: int, hi: int | None) -> float:
    """Midpoint integral approximation of sum_{lo<k<=hi} k^beta P(eps=k)."""
    # k^beta (k^-a - (k+1)^-a) ~ a k^(beta-a-1); midpoint rule at half-integers.
    a, b = alpha, beta
    lo_h = lo + 0.5
    if hi is None:
        if b >= a:
            raise ValueError("unbounded tail integral requires beta < alpha")
        return a / (a - b) * lo_h ** (b - a)
    hi_h = hi + 0.5
    if b == a:
        return a * math.log(hi_h / lo_h)
    return a / (a - b) * (lo_h ** (b - a) - hi_h ** (b - a))


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution with subcritical mean, one of three families.

    ``bernoulli`` uses success probability = mean, ``poisson`` uses rate =
    mean, ``geometric`` counts failures before a success with the given mean.
    All three have finite second moment.
    """

    family: str
    mean: float

    _FAMILIES = ("bernoulli", "poisson", "geometric")

    def __post_init__(self) -> None:
        if self.family not in self._FAMILIES:
            raise ValueError(f"unknown offspring family {self.family!r}")
        if not 0.0 <= self.mean < 1.0:
            raise ValueError(f"offspring mean must lie in [0, 1), got {self.mean}")

    def variance(self) -> float:
        m = self.mean
        if self.family == "bernoulli":
            return m * (1.0 - m)
        if self.family == "poisson":
            return m
        return m * (1.0 + m)

    def aggregate(self, counts, rng: np.random.Generator):
        """Total offspring of ``counts`` parents (vectorized over counts).

        Bernoulli and Poisson parents aggregate to binomial and Poisson laws.
        Geometric parents aggregate to a negative binomial with the same law
        as the explicit sum; sampling per parent is infeasible once states
        reach the 1e9+ range that heavy immigration produces.
        """
        c = np.atleast_1d(np.asarray(counts))
        scalar = np.asarray(counts).ndim == 0
        if self.mean == 0.0:
            out = np.zeros_like(c)
        elif self.family == "bernoulli":
            out = rng.binomial(c, self.mean)
        elif self.family == "poisson":
            out = rng.poisson(self.mean * c)
        else:
            out = np.zeros_like(c)
            pos = c > 0
            if np.any(pos):
                out[pos] = rng.negative_binomial(c[pos], 1.0 / (1.0 + self.mean))
        return int(out[0]) if scalar else out


def sample_immigration(law: ImmigrationLaw, rng: np.random.Generator) -> int:
    """One immigration draw."""
    return law.sample(rng)


def immigration_tail(law: ImmigrationLaw, x) -> float:
    """P(eps > x); rejects negative x."""
    return law.tail(x)


def norming_sequence(model, n: int, mode: str = "analytic",
                     sample_size: int | None = None,
                     rng: np.random.Generator | None = None) -> float:
    """Scaling constant a_n with n * P(X_0 > a_n) -> 1.

    Analytic mode solves n * (a+1)^(-alpha) / (1 - m^alpha) = 1 using the
    stationary-tail equivalence, giving
    ``a_n = (n / (1 - m^alpha))^(1/alpha) - 1``.  Empirical mode returns the
    (1 - 1/n) quantile of a fresh stationary sample.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = model.immigration.alpha
    m = model.offspring.mean
    if mode == "analytic":
        return (n / (1.0 - m ** alpha)) ** (1.0 / alpha) - 1.0
    if mode == "empirical":
        from . import branching

        size = sample_size if sample_size is not None else max(10 * n, 10_000)
        if size < n:
            raise InsufficientSampleError(
                f"empirical norming needs a sample of at least n={n} stationary "
                f"draws, got {size}"
            )
        if rng is None:
            raise ValueError("empirical mode needs an explicit rng")
        states = branching.stationary_states(model, size, rng)
        return float(np.quantile(states, 1.0 - 1.0 / n))
    raise ValueError(f"unknown norming mode {mode!r}")


@dataclass(frozen=True)
class NormingSequence:
    """Rule n -> a_n for a fixed model, in analytic or empirical-quantile mode."""

    model: object
    mode: str = "analytic"
    sample_size: int | None = None
    seed: int | None = None

    def __call__(self, n: int) -> float:
        rng = None if self.seed is None else np.random.default_rng(self.seed)
        return norming_sequence(self.model, n, mode=self.mode,
                                sample_size=self.sample_size, rng=rng)


def karamata_ratio(law: ImmigrationLaw, beta: float, x: float) -> float:
    """Truncated-moment ratio whose large-x limit is (beta-alpha)/alpha
    (for beta >= alpha, denominator E(eps^beta; eps <= x)) or
    (alpha-beta)/alpha (for beta < alpha, denominator E(eps^beta; eps > x))."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if x < 1:
        raise ValueError("x must be >= 1")
    num = x ** beta * law.tail(x)
    if beta >= law.alpha:
        return num / law.truncated_moment(beta, x)
    return num / (law.moment(beta) - law.truncated_moment(beta, x))


def hill_estimator(sample, k: int | None = None) -> float:
    """Tail-index estimate from the k largest order statistics.

    Returns ``k / sum_{i<=k} log(X_(i) / X_(k+1))`` with descending order
    statistics; ``k`` defaults to floor(sqrt(N)).
    """
    xs = np.asarray(sample, dtype=float)
    if xs.ndim != 1 or xs.size < 2:
        raise ValueError("need a one-dimensional sample of at least 2 points")
    if np.any(xs <= 0):
        raise ValueError("sample values must be positive")
    if k is None:
        k = int(math.isqrt(xs.size))
    if not 1 <= k < xs.size:
        raise ValueError(f"k must lie in [1, {xs.size - 1}], got {k}")
    desc = np.sort(xs)[::-1]
    denom = float(np.sum(np.log(desc[:k] / desc[k])))
    if denom == 0.0:
        raise DegenerateSampleError("top order statistics are tied; estimator undefined")
    return k / denom
