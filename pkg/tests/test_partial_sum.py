import math

import mpmath as mp
import numpy as np
import pytest

from heavybranch.branching import PathSample, make_model, path_matrix, rep_rng
from heavybranch.heavy_tail import norming_sequence
from heavybranch.partial_sum import (BlockSequence, Centering, FidisGrid,
                                     InfiniteMeanError, block_sequence,
                                     fidis_ensemble, gamma2_interval,
                                     iterated_aggregate, resolve_centering,
                                     scaled_fidis, stationary_mean,
                                     truncated_mean)

mp.mp.dps = 30


def _path(values):
    return PathSample(values=np.asarray(values, dtype=np.int64), seed=(0, 0),
                      burn_in=1)


class TestCentering:
    def test_kinds(self):
        assert Centering.none().value == 0.0
        assert Centering.truncated(3.5).value == 3.5
        with pytest.raises(ValueError):
            Centering("median")
        with pytest.raises(ValueError):
            Centering("none", 1.0)

    def test_validity_by_tail_index(self):
        with pytest.raises(ValueError):
            Centering.none().validate_for(1.25)
        with pytest.raises(ValueError):
            Centering.full(9.19).validate_for(0.5)
        Centering.truncated(1.0).validate_for(0.5)
        Centering.truncated(1.0).validate_for(1.25)

    def test_resolver(self):
        model = make_model(0.5, 1.25)
        cent = resolve_centering(model, "full", a_n=100.0)
        assert cent.value == pytest.approx(stationary_mean(model))
        cent2 = resolve_centering(make_model(0.5, 0.5), "truncated", a_n=1e4,
                                  rng=rep_rng(1), reps=20_000)
        assert cent2.value > 0.0
        with pytest.raises(ValueError):
            resolve_centering(model, "truncated", a_n=10.0)


class TestFidisGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            FidisGrid(())
        with pytest.raises(ValueError):
            FidisGrid((0.0, 1.0))
        with pytest.raises(ValueError):
            FidisGrid((0.5, 0.5))

    def test_floor_indices(self):
        grid = FidisGrid((0.25, 0.5, 1.0))
        assert np.array_equal(grid.indices(10), [2, 5, 10])


class TestScaledFidis:
    def test_zero_path_no_centering(self):
        fid = scaled_fidis(_path([0] * 11), 10, 5.0, Centering.none(),
                           FidisGrid((0.5, 1.0)))
        assert np.array_equal(fid.values, [0.0, 0.0])

    def test_zero_path_with_centering(self):
        c = Centering.truncated(2.0)
        fid = scaled_fidis(_path([0] * 11), 10, 5.0, c, FidisGrid((0.5, 1.0)))
        assert np.allclose(fid.values, [-2.0 * 5 / 5.0, -2.0 * 10 / 5.0])

    def test_uncentered_values_nonnegative_nondecreasing(self):
        model = make_model(0.5, 0.5)
        vals = path_matrix(model, 100, 1, rep_rng(2))[0]
        fid = scaled_fidis(_path(vals), 100, norming_sequence(model, 100),
                           Centering.none(), FidisGrid((0.2, 0.5, 0.9, 1.0)))
        assert np.all(fid.values >= 0.0)
        assert np.all(np.diff(fid.values) >= 0.0)

    def test_first_state_excluded_from_sums(self):
        # partial sums start at the first transition, not the seed state
        fid = scaled_fidis(_path([7, 1, 2]), 2, 1.0, Centering.none(),
                           FidisGrid((0.5, 1.0)))
        assert np.array_equal(fid.values, [1.0, 3.0])

    def test_increment_consistency(self):
        model = make_model(0.5, 0.5)
        vals = path_matrix(model, 200, 1, rep_rng(3))[0]
        n, a_n = 200, norming_sequence(model, 200)
        c = Centering.truncated(1.7)
        grid = FidisGrid((0.13, 0.42, 0.77, 1.0))
        fid = scaled_fidis(_path(vals), n, a_n, c, grid)
        idx = grid.indices(n)
        for ell in range(1, len(idx)):
            window = vals[idx[ell - 1] + 1: idx[ell] + 1].sum()
            expected = (window - c.value * (idx[ell] - idx[ell - 1])) / a_n
            assert fid.values[ell] - fid.values[ell - 1] == pytest.approx(
                expected, rel=1e-12)

    def test_grid_beyond_path_rejected(self):
        with pytest.raises(ValueError):
            scaled_fidis(_path([0] * 5), 10, 1.0, Centering.none(),
                         FidisGrid((1.0,)))


class TestTruncatedMean:
    def test_zero_truncation(self):
        model = make_model(0.5, 0.5)
        est, se = truncated_mean(model, 0.0, 10_000, rep_rng(4))
        assert est == 0.0 and se == 0.0

    def test_iid_case_against_exact_summation(self):
        model = make_model(0.0, 0.5)
        a = 500.0
        law = model.immigration
        k = np.arange(1, 501, dtype=float)
        exact = float(np.sum(k * (k ** -0.5 - (k + 1) ** -0.5)))
        assert exact == pytest.approx(law.truncated_moment(1.0, a), rel=1e-12)
        est, se = truncated_mean(model, a, 400_000, rep_rng(5))
        assert abs(est - exact) < 3 * se + 1e-9

    def test_monotone_approach_to_full_mean(self):
        model = make_model(0.5, 1.25)
        target = stationary_mean(model)
        rng = rep_rng(6)
        estimates = [truncated_mean(model, a, 200_000, rng, chains=2000)
                     for a in [10.0, 100.0, 10_000.0]]
        values = [e for e, _ in estimates]
        assert values[0] < values[1] < values[2]
        assert abs(values[2] - target) < 3 * estimates[2][1] + 0.01 * target

    def test_needs_enough_replications(self):
        with pytest.raises(ValueError):
            truncated_mean(make_model(0.0, 0.5), 10.0, 100, rep_rng(0))


class TestStationaryMean:
    def test_iid_is_zeta(self):
        ref = float(mp.zeta(mp.mpf("1.25")))
        assert stationary_mean(make_model(0.0, 1.25)) == pytest.approx(ref, rel=1e-8)

    def test_geometric_factor(self):
        ref = 2.0 * float(mp.zeta(mp.mpf("1.25")))
        assert stationary_mean(make_model(0.5, 1.25)) == pytest.approx(ref, rel=1e-8)

    def test_empirical_agreement(self):
        # median of block means: robust against the infinite-variance tail
        model = make_model(0.5, 1.25)
        target = stationary_mean(model)
        vals = path_matrix(model, 2000, 200, rep_rng(7)).astype(float)
        block_means = vals[:, 1:].reshape(50, -1).mean(axis=1)
        assert abs(np.median(block_means) / target - 1.0) < 0.25

    def test_infinite_below_one(self):
        with pytest.raises(InfiniteMeanError):
            stationary_mean(make_model(0.5, 0.5))


class TestIteratedAggregate:
    def test_single_copy_reduces_to_scaled_fidis(self):
        model = make_model(0.5, 0.5)
        n, grid = 100, FidisGrid((0.5, 1.0))
        c = Centering.truncated(1.3)
        master = np.random.default_rng(np.random.SeedSequence(77))
        agg = iterated_aggregate(model, n, 1, c, grid, master)
        replay = np.random.default_rng(np.random.SeedSequence(77)).spawn(1)[0]
        vals = path_matrix(model, n, 1, replay)[0]
        fid = scaled_fidis(_path(vals), n, norming_sequence(model, n), c, grid)
        assert np.allclose(agg.values, fid.values, rtol=1e-12)

    def test_centered_vs_uncentered_offset_is_exact(self):
        model = make_model(0.5, 0.5)
        n, copies = 60, 4
        grid = FidisGrid((0.5, 1.0))
        trunc_val = 2.31
        agg_c = iterated_aggregate(model, n, copies, Centering.truncated(trunc_val),
                                   grid, np.random.default_rng(np.random.SeedSequence(5)))
        agg_u = iterated_aggregate(model, n, copies, Centering.none(), grid,
                                   np.random.default_rng(np.random.SeedSequence(5)))
        idx = grid.indices(n)
        a_n = norming_sequence(model, n)
        offset = idx * copies * trunc_val / (a_n * copies ** (1 / model.alpha))
        assert np.allclose(agg_u.values - agg_c.values, offset, rtol=1e-12)

    def test_copy_order_invariance(self):
        model = make_model(0.5, 0.5)
        n, copies = 40, 5
        grid = FidisGrid((1.0,))
        master = np.random.default_rng(np.random.SeedSequence(9))
        agg = iterated_aggregate(model, n, copies, Centering.none(), grid, master)
        # reconstruct from per-copy streams summed in reversed order
        streams = np.random.default_rng(np.random.SeedSequence(9)).spawn(copies)
        per_copy = [path_matrix(model, n, 1, s)[0][1:].sum() for s in streams]
        pooled = math.fsum(reversed(per_copy))
        a_n = norming_sequence(model, n)
        expected = pooled / (a_n * copies ** (1 / model.alpha))
        assert agg.values[0] == pytest.approx(expected, rel=1e-12)

    def test_centering_validated(self):
        model = make_model(0.5, 1.25)
        with pytest.raises(ValueError):
            iterated_aggregate(model, 10, 2, Centering.none(), FidisGrid((1.0,)),
                               np.random.default_rng(0))


class TestFidisEnsemble:
    def test_shapes_and_scaling(self):
        model = make_model(0.5, 0.5)
        vals = fidis_ensemble(model, 50, 1.0, 500, Centering.none(), rep_rng(8))
        assert vals.shape == (500,)
        assert np.all(vals >= 0.0)

    def test_pooled_copies_shrink_spread(self):
        # averaging independent copies at the stable scaling keeps the law
        # comparable; crude sanity that pooling does not blow up
        model = make_model(0.5, 0.5)
        one = fidis_ensemble(model, 50, 1.0, 400, Centering.none(), rep_rng(9))
        four = fidis_ensemble(model, 50, 1.0, 400, Centering.none(), rep_rng(10),
                              copies=4)
        assert np.isfinite(four).all()
        assert np.median(four) == pytest.approx(np.median(one), rel=1.0)


class TestCenteringEquivalence:
    def test_truncated_plus_offset_equals_uncentered(self):
        # below tail index 1 the two displays differ by exactly the scaled
        # centering constant per grid point
        model = make_model(0.5, 0.5)
        n = 150
        vals = path_matrix(model, n, 1, rep_rng(20))[0]
        a_n = norming_sequence(model, n)
        grid = FidisGrid((0.3, 0.7, 1.0))
        c = 1.9
        trunc = scaled_fidis(_path(vals), n, a_n, Centering.truncated(c), grid)
        plain = scaled_fidis(_path(vals), n, a_n, Centering.none(), grid)
        offset = grid.indices(n) * c / a_n
        assert np.allclose(trunc.values + offset, plain.values, rtol=1e-12)

    def test_truncated_minus_full_is_scaled_tail_mean(self):
        # above tail index 1 the gap between the two centerings is the scaled
        # truncated-tail mean, here checked as the exact algebraic offset with
        # the constants estimated/computed separately
        model = make_model(0.5, 1.25)
        n = 400
        vals = path_matrix(model, n, 1, rep_rng(21))[0]
        a_n = norming_sequence(model, n)
        grid = FidisGrid((0.5, 1.0))
        full_c = stationary_mean(model)
        trunc_c, se = truncated_mean(model, a_n, 300_000, rep_rng(22), chains=3000)
        trunc = scaled_fidis(_path(vals), n, a_n, Centering.truncated(trunc_c), grid)
        full = scaled_fidis(_path(vals), n, a_n, Centering.full(full_c), grid)
        idx = grid.indices(n)
        assert np.allclose(trunc.values - full.values,
                           idx * (full_c - trunc_c) / a_n, rtol=1e-12)
        # the constant gap is the tail mean E(X; X > a_n), positive and, at
        # this scale, already near its a/(a-1) * a_n/n limit
        tail_mean = full_c - trunc_c
        assert tail_mean > 0.0
        assert n * tail_mean / a_n == pytest.approx(5.0, rel=0.35)


class TestIteratedDistributionalTarget:
    def test_pooled_copies_match_limit_law(self):
        # pooled-copy scaled sums at moderate (n, N) already sit close to the
        # strictly stable limit
        from heavybranch.stable_law import limit_params
        from heavybranch.verify import ks_distance
        model = make_model(0.5, 0.5)
        values = fidis_ensemble(model, 1000, 1.0, 1200, Centering.none(),
                                rep_rng(23), copies=20)
        law = limit_params(0.5, 0.5, "none")
        assert ks_distance(values, law) < 0.1


class TestBlockSequence:
    def test_floor_arithmetic(self):
        blocks = block_sequence(10_000, 0.25, 0.75, alpha=0.5)
        assert blocks.m_n == 1000
        assert blocks.r_n == 10

    def test_valid_above_one(self):
        blocks = block_sequence(10_000, None, 0.58, alpha=1.25)
        assert blocks.gamma2 == 0.58
        assert blocks.gamma1 == 0.29

    def test_no_admissible_exponent_at_three_halves(self):
        with pytest.raises(ValueError, match=r"\(1, 4/3\)"):
            block_sequence(10_000, 0.2, 0.55, alpha=1.5)
        with pytest.raises(ValueError):
            block_sequence(10_000, alpha=1.5)

    def test_interval_endpoints(self):
        lo, hi = gamma2_interval(0.5)
        assert (lo, hi) == (0.5, 1.0)
        lo, hi = gamma2_interval(1.25)
        assert lo == 0.5 and hi == pytest.approx(0.6)

    def test_defaults_midpoint(self):
        blocks = block_sequence(1000, alpha=0.5)
        assert blocks.gamma2 == pytest.approx(0.75)
        assert blocks.gamma1 == pytest.approx(0.375)

    def test_constraint_violations_reported(self):
        with pytest.raises(ValueError, match="gamma2"):
            block_sequence(1000, 0.2, 0.4, alpha=0.5)
        with pytest.raises(ValueError, match="gamma1"):
            block_sequence(1000, 0.8, 0.75, alpha=0.5)

    def test_ordering_for_large_n(self):
        for n in [10_000, 100_000, 1_000_000]:
            blocks = block_sequence(n, alpha=0.5)
            assert blocks.r_n < blocks.m_n < n

    def test_is_dataclass(self):
        assert isinstance(block_sequence(100, alpha=0.5), BlockSequence)
