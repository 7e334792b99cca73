"""Strongly stationary branching process with heavy-tailed immigration.

State recursion: ``X_k = (offspring of the X_{k-1} parents) + eps_k``.  The
chain is started in its stationary law by burning in from zero: the state
after ``B`` steps from zero equals in law the stationary backward series
truncated at ``B`` terms, so ``B`` is chosen to make the discarded remainder
negligible at the model's stationarity tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .heavy_tail import ImmigrationLaw, OffspringLaw


class ThresholdTooHighError(ValueError):
    """Raised when a conditioning threshold leaves too few tail hits."""


@dataclass(frozen=True)
class GWIModel:
    """Subcritical branching-with-immigration model.

    Limit-theorem workflows need the immigration tail index in
    (0, 1) or (1, 4/3); index 1 and [4/3, 2) are rejected here because the
    scaled partial sums have no usable stable limit in those ranges.
    """

    offspring: OffspringLaw
    immigration: ImmigrationLaw
    stationarity_tolerance: float = 1e-4

    def __post_init__(self) -> None:
        a = self.immigration.alpha
        if a == 1.0:
            raise ValueError(
                "tail index 1 is excluded: the one-sided process admits no "
                "1-stable partial-sum limit"
            )
        if a >= 4.0 / 3.0:
            raise ValueError(
                "tail index must be below 4/3: block scales with "
                "n*m_n/a_n^2 -> 0 exist only for indices in (1, 4/3)"
            )
        if not 0.0 < self.stationarity_tolerance < 1.0:
            raise ValueError("stationarity tolerance must lie in (0, 1)")

    @property
    def alpha(self) -> float:
        return self.immigration.alpha

    @property
    def offspring_mean(self) -> float:
        return self.offspring.mean

    def burn_in(self) -> int:
        return _burn_in_steps(self.offspring.mean, self.immigration.alpha,
                              self.stationarity_tolerance)


def make_model(offspring_mean: float, alpha: float, family: str = "bernoulli",
               stationarity_tolerance: float = 1e-4) -> GWIModel:
    """Convenience constructor used by the CLI and tests."""
    return GWIModel(OffspringLaw(family, offspring_mean), ImmigrationLaw(alpha),
                    stationarity_tolerance)


@lru_cache(maxsize=128)
def _burn_in_steps(m: float, alpha: float, tol: float) -> int:
    """Smallest B with E(eps^b) m^(Bb) / (1 - m^b) <= tol for b = alpha/2.

    This is a Markov bound on the probability that the discarded tail of the
    stationary backward series is >= 1; a fractional moment is used because
    the immigration mean is infinite when alpha < 1.
    """
    if m == 0.0:
        return 1
    b = alpha / 2.0
    frac_moment = ImmigrationLaw(alpha).moment(b)
    bound = math.log(tol * (1.0 - m ** b) / frac_moment) / (b * math.log(m))
    return max(1, math.ceil(bound))


@dataclass(frozen=True)
class PathSample:
    """One realized trajectory X_0..X_n with its seed provenance."""

    values: np.ndarray
    seed: tuple[int, int]
    burn_in: int

    def __post_init__(self) -> None:
        if np.any(self.values < 0):
            raise ValueError("path values must be non-negative")

    def __len__(self) -> int:
        return len(self.values)


def _step_states(model: GWIModel, states: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """One transition applied to a vector of states."""
    return model.offspring.aggregate(states, rng) + model.immigration.sample(
        rng, states.shape)


def step(model: GWIModel, x: int, rng: np.random.Generator) -> int:
    """Next state from current state ``x`` (empty offspring sum when x = 0)."""
    if x < 0:
        raise ValueError("state must be non-negative")
    nxt = _step_states(model, np.asarray([x], dtype=np.int64), rng)
    return int(nxt[0])


def stationary_states(model: GWIModel, reps: int,
                      rng: np.random.Generator) -> np.ndarray:
    """``reps`` independent draws from the stationary law (vectorized burn-in)."""
    states = np.zeros(reps, dtype=np.int64)
    for _ in range(model.burn_in()):
        states = _step_states(model, states, rng)
    return states


def sample_stationary(model: GWIModel, rng: np.random.Generator) -> tuple[int, int]:
    """One stationary draw together with the burn-in length used."""
    state = int(stationary_states(model, 1, rng)[0])
    return state, model.burn_in()


def simulate_path(model: GWIModel, n: int, seed: int, rep: int = 0) -> PathSample:
    """Stationary path X_0..X_n from the stream derived from (seed, rep)."""
    if n < 0:
        raise ValueError("path length must be >= 0")
    rng = rep_rng(seed, rep)
    values = np.empty(n + 1, dtype=np.int64)
    state, burn = sample_stationary(model, rng)
    values[0] = state
    for k in range(1, n + 1):
        state = step(model, state, rng)
        values[k] = state
    return PathSample(values=values, seed=(seed, rep), burn_in=burn)


def path_matrix(model: GWIModel, n: int, reps: int,
                rng: np.random.Generator) -> np.ndarray:
    """(reps, n+1) array of independent stationary paths, stepped in lockstep."""
    out = np.empty((reps, n + 1), dtype=np.int64)
    out[:, 0] = stationary_states(model, reps, rng)
    states = out[:, 0]
    for k in range(1, n + 1):
        states = _step_states(model, states, rng)
        out[:, k] = states
    return out


def partial_sum_ensemble(model: GWIModel, indices, reps: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Partial sums S_j = X_1 + .. + X_j recorded at the given indices.

    Returns a (reps, len(indices)) float array; paths are stepped in lockstep
    so memory stays O(reps) regardless of the horizon.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if np.any(idx < 0):
        raise ValueError("indices must be non-negative")
    n_max = int(idx.max()) if idx.size else 0
    out = np.zeros((reps, idx.size))
    states = stationary_states(model, reps, rng)
    sums = np.zeros(reps)
    record = {int(j): np.flatnonzero(idx == j) for j in np.unique(idx)}
    if 0 in record:
        out[:, record[0]] = 0.0
    for k in range(1, n_max + 1):
        states = _step_states(model, states, rng)
        sums += states
        cols = record.get(k)
        if cols is not None:
            out[:, cols] = sums[:, None]
    return out


def chain_mean(model: GWIModel, func, draws: int, rng: np.random.Generator,
               chains: int | None = None) -> tuple[float, float]:
    """Stationary mean of ``func(states)`` from many independent chains.

    Each chain is burned in once and then contributes ``draws // chains``
    consecutive stationary observations, so long chains amortize the burn-in.
    The standard error is taken across the independent chain means, which is
    valid regardless of the in-chain autocorrelation.
    """
    if chains is None:
        chains = max(16, min(100_000, draws // 1000))
    length = max(1, draws // chains)
    states = stationary_states(model, chains, rng)
    acc = np.asarray(func(states), dtype=float)
    for _ in range(length - 1):
        states = _step_states(model, states, rng)
        acc += func(states)
    per_chain = acc / length
    est = float(per_chain.mean())
    se = float(per_chain.std(ddof=1) / math.sqrt(chains))
    return est, se


def stationary_tail_ratio(model: GWIModel, x: float, reps: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of P(X_0 > x) / P(eps > x) with standard error.

    The large-x limit of this ratio is 1 / (1 - m^alpha).
    """
    if reps < 1000:
        raise ValueError("need at least 1e3 replications")
    tail = model.immigration.tail(x)
    if tail * reps < 100:
        raise ThresholdTooHighError(
            f"expected tail hits {tail * reps:.1f} < 100; lower the threshold "
            "or raise the replication count"
        )
    states = stationary_states(model, reps, rng)
    freq = float(np.mean(states > x))
    se = math.sqrt(freq * (1.0 - freq) / reps)
    return freq / tail, se / tail


def tail_ratio_target(model: GWIModel) -> float:
    """Stationary-tail constant 1 / (1 - m^alpha)."""
    return 1.0 / (1.0 - model.offspring.mean ** model.alpha)


def rep_rng(seed: int, rep: int = 0) -> np.random.Generator:
    """Deterministic per-replication stream derived from (master seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
