import math
import types

import mpmath as mp
import numpy as np
import pytest
from scipy.optimize import brentq

from heavybranch.heavy_tail import (DegenerateSampleError, ImmigrationLaw,
                                    InsufficientSampleError, OffspringLaw,
                                    hill_estimator, immigration_tail,
                                    karamata_ratio, norming_sequence,
                                    sample_immigration)
from heavybranch.branching import make_model, stationary_states

mp.mp.dps = 30


class TestImmigrationSampling:
    def test_inverse_transform_u_001(self):
        assert ImmigrationLaw(0.5).from_uniform(0.01) == 10_000

    def test_inverse_transform_u_099(self):
        # 0.99^-2 lies in [1, 2)
        assert ImmigrationLaw(0.5).from_uniform(0.99) == 1

    def test_sampler_is_the_inverse_transform(self):
        law = ImmigrationLaw(0.5)
        rng1, rng2 = np.random.default_rng(8), np.random.default_rng(8)
        draws = law.sample(rng1, size=1000)
        assert np.array_equal(draws, law.from_uniform(1.0 - rng2.random(1000)))
        assert sample_immigration(law, np.random.default_rng(8)) == draws[0]

    def test_tail_frequency_matches_exact_tail(self):
        law = ImmigrationLaw(0.5)
        rng = np.random.default_rng(1001)
        draws = law.sample(rng, size=1_000_000)
        assert abs(np.mean(draws > 99) - 0.1) < 0.003

    def test_inverse_transform_consistency_on_grid(self):
        # pushing a fine uniform grid through the sampler reproduces the CDF
        law = ImmigrationLaw(0.7)
        u = (np.arange(200_000) + 0.5) / 200_000
        draws = np.floor(u ** (-1.0 / law.alpha))
        for k in [1, 2, 5, 17]:
            exact = 1.0 - law.tail(k)
            assert abs(np.mean(draws <= k) - exact) < 1e-4


class TestImmigrationTail:
    def test_at_zero(self):
        assert immigration_tail(ImmigrationLaw(0.5), 0) == 1.0

    def test_alpha_half_at_99(self):
        assert immigration_tail(ImmigrationLaw(0.5), 99) == pytest.approx(0.1, abs=1e-15)

    def test_alpha_125_at_9(self):
        exact = float(mp.mpf(10) ** (-mp.mpf("1.25")))
        assert immigration_tail(ImmigrationLaw(1.25), 9) == pytest.approx(exact, rel=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            immigration_tail(ImmigrationLaw(0.5), -0.1)

    def test_monotone_and_right_continuous(self):
        law = ImmigrationLaw(0.8)
        xs = np.linspace(0.0, 50.0, 501)
        tails = law.tail(xs)
        assert np.all(np.diff(tails) <= 0)
        for k in range(5):
            assert law.tail(k) == law.tail(k + 1e-9)
        assert law.tail(0) <= 1.0

    def test_alpha_domain(self):
        for bad in [0.0, 2.0, -1.0, 2.5]:
            with pytest.raises(ValueError):
                ImmigrationLaw(bad)


class TestNormingSequence:
    def test_iid_alpha_half(self):
        model = make_model(0.0, 0.5)
        assert norming_sequence(model, 100) == pytest.approx(9999.0, rel=1e-12)

    def test_subcritical_alpha_half(self):
        model = make_model(0.5, 0.5)
        a = norming_sequence(model, 100)
        # oracle: solve n (a+1)^-alpha / (1 - m^alpha) = 1 numerically
        root = brentq(lambda v: 100 * (v + 1) ** -0.5 / (1 - 0.5 ** 0.5) - 1,
                      1.0, 1e9)
        assert a == pytest.approx(root, rel=1e-9)
        assert a == pytest.approx(116567.5, abs=0.2)

    def test_boundary_index_formula(self):
        # the tail index 1 law is excluded from models but the norming rule
        # itself is plain arithmetic
        fake = types.SimpleNamespace(
            immigration=types.SimpleNamespace(alpha=1.0),
            offspring=types.SimpleNamespace(mean=0.0))
        assert norming_sequence(fake, 10) == pytest.approx(9.0, rel=1e-12)

    @pytest.mark.parametrize("m,alpha,n_grid", [
        (0.0, 0.5, [10, 100, 1000, 10_000, 100_000]),
        (0.5, 0.5, [10, 100, 1000, 10_000, 100_000]),
        (0.5, 1.25, [1000, 10_000, 100_000, 1_000_000]),
    ])
    def test_tail_identity_band(self, m, alpha, n_grid):
        model = make_model(m, alpha)
        law = model.immigration
        prev = 0.0
        for n in n_grid:
            a_n = norming_sequence(model, n)
            assert a_n > prev
            prev = a_n
            # continuous version is exact by construction
            cont = n * (a_n + 1) ** -alpha / (1 - m ** alpha)
            assert cont == pytest.approx(1.0, rel=1e-10)
            # floored tail stays within the 1% band once a_n is large enough
            ratio = n * law.tail(a_n) / (1 - m ** alpha)
            assert 0.99 <= ratio <= 1.01

    def test_empirical_mode(self):
        model = make_model(0.0, 0.5)
        rng = np.random.default_rng(7)
        a_emp = norming_sequence(model, 50, mode="empirical",
                                 sample_size=200_000, rng=rng)
        a_ana = norming_sequence(model, 50)
        assert abs(a_emp / a_ana - 1.0) < 0.5

    def test_empirical_mode_needs_enough_samples(self):
        model = make_model(0.0, 0.5)
        with pytest.raises(InsufficientSampleError):
            norming_sequence(model, 1000, mode="empirical", sample_size=100,
                             rng=np.random.default_rng(0))


class TestKaramataRatio:
    def test_beta_above_alpha(self):
        ratio = karamata_ratio(ImmigrationLaw(0.5), 1.0, 1e6)
        assert abs(ratio - 1.0) < 0.05

    def test_beta_below_alpha(self):
        ratio = karamata_ratio(ImmigrationLaw(0.5), 0.25, 1e6)
        assert abs(ratio - 0.5) < 0.05 * 0.5

    def test_boundary_beta_equal_alpha_decays(self):
        law = ImmigrationLaw(0.5)
        ratios = [karamata_ratio(law, 0.5, x) for x in [1e3, 1e5, 1e7]]
        assert ratios[0] > ratios[1] > ratios[2] > 0

    @pytest.mark.parametrize("alpha", [0.4, 0.5, 0.6])
    def test_first_moment_limit_across_alphas(self, alpha):
        target = (1.0 - alpha) / alpha
        ratio = karamata_ratio(ImmigrationLaw(alpha), 1.0, 1e6)
        assert abs(ratio / target - 1.0) < 0.05

    def test_rejects_bad_args(self):
        law = ImmigrationLaw(0.5)
        with pytest.raises(ValueError):
            karamata_ratio(law, 0.0, 1e6)
        with pytest.raises(ValueError):
            karamata_ratio(law, 1.0, 0.5)


class TestTruncatedMoments:
    def test_matches_brute_force(self):
        law = ImmigrationLaw(0.7)
        for beta, x in [(1.0, 50), (0.3, 120), (2.0, 75)]:
            k = np.arange(1, x + 1, dtype=float)
            brute = float(np.sum(k ** beta * (k ** -0.7 - (k + 1) ** -0.7)))
            assert law.truncated_moment(beta, x) == pytest.approx(brute, rel=1e-12)

    def test_full_moment_against_quadrature_oracle(self):
        # E(eps^b) = sum_k k^b (k^-a - (k+1)^-a); oracle: high-precision
        # partial sum plus exact quadrature of the summand's continuation
        # (midpoint offset makes the sum-to-integral error O(g''))
        law = ImmigrationLaw(1.25)
        a, b = mp.mpf("1.25"), mp.mpf("0.5")
        g = lambda t: t ** b * (t ** -a - (t + 1) ** -a)
        M = 200_000
        ref = mp.nsum(g, [1, M]) + mp.quad(g, [M + mp.mpf("0.5"), mp.inf])
        assert law.moment(0.5) == pytest.approx(float(ref), rel=1e-5)

    def test_infinite_moment_rejected(self):
        with pytest.raises(ValueError):
            ImmigrationLaw(0.5).moment(0.5)

    def test_mean_is_zeta(self):
        assert ImmigrationLaw(1.25).mean() == pytest.approx(
            float(mp.zeta(mp.mpf("1.25"))), rel=1e-8)


class TestHillEstimator:
    def test_single_log_ratio(self):
        assert hill_estimator([math.e * 2.0, 2.0], k=1) == pytest.approx(1.0)

    def test_recovers_pareto_index(self):
        rng = np.random.default_rng(42)
        draws = ImmigrationLaw(1.0).sample(rng, size=100_000).astype(float)
        est = hill_estimator(draws[draws > 0])
        assert 0.9 <= est <= 1.1

    def test_recovers_stationary_index(self):
        model = make_model(0.5, 0.5)
        rng = np.random.default_rng(11)
        states = stationary_states(model, 100_000, rng).astype(float)
        est = hill_estimator(states[states > 0])
        assert 0.4 <= est <= 0.6

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        xs = rng.pareto(1.5, size=1000) + 1.0
        base = hill_estimator(xs, k=40)
        assert hill_estimator(4.0 * xs, k=40) == base  # power of two: exact
        assert hill_estimator(3.7 * xs, k=40) == pytest.approx(base, rel=1e-10)

    def test_degenerate_ties(self):
        with pytest.raises(DegenerateSampleError):
            hill_estimator([2.0, 2.0, 2.0], k=2)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            hill_estimator([1.0, 2.0], k=2)
        with pytest.raises(ValueError):
            hill_estimator([1.0, 2.0], k=0)

    def test_positive_values_required(self):
        with pytest.raises(ValueError):
            hill_estimator([1.0, -2.0, 3.0])


class TestOffspringLaw:
    def test_validation(self):
        with pytest.raises(ValueError):
            OffspringLaw("bernoulli", 1.0)
        with pytest.raises(ValueError):
            OffspringLaw("normal", 0.5)

    def test_variances(self):
        assert OffspringLaw("bernoulli", 0.25).variance() == pytest.approx(0.1875)
        assert OffspringLaw("poisson", 0.25).variance() == pytest.approx(0.25)
        assert OffspringLaw("geometric", 0.25).variance() == pytest.approx(0.3125)

    @pytest.mark.parametrize("family", ["bernoulli", "poisson", "geometric"])
    def test_aggregate_moments(self, family):
        law = OffspringLaw(family, 0.6)
        rng = np.random.default_rng(3)
        counts = np.full(200_000, 50)
        totals = law.aggregate(counts, rng)
        assert totals.mean() == pytest.approx(30.0, rel=0.02)
        assert totals.var() == pytest.approx(50 * law.variance(), rel=0.05)

    def test_geometric_aggregate_matches_explicit_convolution(self):
        # negative binomial is the exact law of a sum of iid geometrics
        from scipy.stats import geom, nbinom
        mean = 0.6
        p = 1.0 / (1.0 + mean)
        support = np.arange(0, 40)
        single = geom.pmf(support + 1, p)  # shifted: counts failures
        conv = np.convolve(np.convolve(single, single), single)[: len(support)]
        ref = nbinom.pmf(support, 3, p)
        assert np.max(np.abs(conv - ref)) < 1e-12

    def test_zero_mean_shortcut(self):
        law = OffspringLaw("bernoulli", 0.0)
        rng = np.random.default_rng(0)
        assert np.all(law.aggregate(np.arange(10), rng) == 0)
