"""Experiment runner: simulate, verify, aggregate, constants.

Checks draw their randomness from streams spawned per check index off the
master seed, so reports are byte-reproducible from (config, seed) and check
execution order (including the thread pool set via HEAVYBRANCH_THREADS) never
affects results.  Exit status: 0 all checks pass, 1 at least one check
failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import branching, partial_sum, plots, stable_law, verify
from .config import (KNOWN_CHECKS, ConfigError, ExperimentConfig, load_config,
                     with_overrides)
from .heavy_tail import hill_estimator, karamata_ratio, norming_sequence
from .report import write_report, write_table
from .verify import CheckRow, VerificationReport

THREADS_ENV = "HEAVYBRANCH_THREADS"


@dataclass
class CheckOutput:
    rows: list[CheckRow] = field(default_factory=list)
    tables: list[tuple[str, tuple[str, ...], list]] = field(default_factory=list)
    figures: list = field(default_factory=list)  # zero-arg callables, run serially


def _row(check_id: str, statistic: str, estimate: float, stderr: float,
         target: float, tolerance: float, passed: bool | None = None) -> CheckRow:
    if passed is None:
        passed = abs(estimate - target) <= tolerance
    return CheckRow(check_id=check_id, statistic=statistic,
                    estimate=float(estimate), stderr=float(stderr),
                    target=float(target), tolerance=float(tolerance),
                    passed=bool(passed))


# ---------------------------------------------------------------------------
# check implementations (model, cfg, rng, out_dir) -> CheckOutput
# ---------------------------------------------------------------------------

def _check_constants(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    m, a = model.offspring_mean, model.alpha
    cont = max(abs(stable_law.c_alpha(1.0 - 1e-4) - math.pi / 2.0),
               abs(stable_law.c_alpha(1.0 + 1e-4) - math.pi / 2.0))
    out.rows.append(_row("constants", "c_alpha_continuity_at_1", cont, 0.0, 0.0,
                         cfg.tolerance("constants", 1e-3)))
    seq = stable_law.b_plus_sequence(m, a, 20)
    out.rows.append(_row("constants", "b_plus_1_identity",
                         float(seq.values[0]), 0.0, 1.0, 1e-12))
    out.rows.append(_row("constants", "increment_20_vs_K",
                         float(seq.increments[-1]), 0.0, seq.c_plus, 1e-3))
    out.tables.append(("constants_b_plus", ("d", "b_plus", "increment"),
                       [(i + 1, seq.values[i], seq.increments[i])
                        for i in range(20)]))
    if cfg.plots:
        out.figures.append(
            lambda: plots.b_plus_increments(seq, out_dir, "constants_b_plus"))
    return out


def _check_tail_ratio(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    a, m = model.alpha, model.offspring_mean
    x = round(0.1 ** (-1.0 / a)) - 1
    reps = max(cfg.replications, 1000)
    est, se = branching.stationary_tail_ratio(model, x, reps, rng)
    target = branching.tail_ratio_target(model)
    rel = 0.05 if m == 0.0 else 0.10
    tol = cfg.tolerance("tail_ratio", rel * target)
    out.rows.append(_row("tail_ratio", f"stationary_tail_over_immigration_x{x}",
                         est, se, target, tol))
    out.tables.append(("tail_ratio", ("threshold", "estimate", "stderr", "target"),
                       [(float(x), est, se, target)]))
    return out


def _check_karamata(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    a = model.alpha
    beta = 1.0
    x = 1e6
    ratio = karamata_ratio(model.immigration, beta, x)
    target = (beta - a) / a if beta >= a else (a - beta) / a
    tol = cfg.tolerance("karamata", 0.05 * max(abs(target), 1.0))
    out.rows.append(_row("karamata", f"truncated_moment_ratio_beta{beta:g}",
                         ratio, 0.0, target, tol))
    return out


def _check_hill(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    reps = min(max(cfg.replications, 10_000), 200_000)
    states = branching.stationary_states(model, reps, rng)
    est = hill_estimator(states[states > 0].astype(float))
    target = model.alpha
    tol = cfg.tolerance("hill", 0.2 * target)
    out.rows.append(_row("hill", f"tail_index_k_sqrtN_N{reps}", est, 0.0,
                         target, tol))
    return out


def _check_b_plus(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    d = 2
    est, se = verify.b_plus_mc(model, d, cfg.n, cfg.replications, rng)
    target = float(stable_law.b_plus_sequence(model.offspring_mean, model.alpha,
                                              d).values[-1])
    tol = cfg.tolerance("b_plus", 0.10 * target)
    out.rows.append(_row("b_plus", f"n_times_P_S{d}_gt_a_n", est, se, target, tol))
    return out


def _check_anti_clustering(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    n = min(cfg.n, 2000)
    reps = min(max(cfg.replications, 10_000), 300_000)
    trend = verify.anti_clustering_trend(model, n, 2, 20, 1.0, reps, rng)
    drop = trend.coarse - trend.fine
    band = trend.coarse_band + trend.fine_band
    out.rows.append(_row("anti_clustering", f"drop_d2_to_d20_n{n}", drop, band,
                         0.0, cfg.tolerance("anti_clustering", 0.0),
                         passed=trend.decreased_beyond_bands()))
    out.tables.append(("anti_clustering", ("d", "estimate", "stderr"),
                       [(2.0, trend.coarse, trend.coarse_band),
                        (20.0, trend.fine, trend.fine_band)]))
    if cfg.plots:
        out.figures.append(lambda: plots.two_scale(
            ["d=2", "d=20"], [trend.coarse, trend.fine],
            [trend.coarse_band, trend.fine_band], out_dir, "anti_clustering",
            ylabel="anti-clustering statistic"))
    return out


def _check_mixing(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    n_fine = cfg.n
    n_coarse = max(100, cfg.n // 100)
    reps = min(max(cfg.replications, 10_000), 50_000)
    coarse, band_c = verify.mixing_residual(model, n_coarse, 1.0, 1.0, reps, rng)
    fine, band_f = verify.mixing_residual(model, n_fine, 1.0, 1.0, reps, rng)
    out.rows.append(_row("mixing", f"residual_drop_n{n_coarse}_to_n{n_fine}",
                         coarse - fine, band_c + band_f, 0.0,
                         cfg.tolerance("mixing", 0.0),
                         passed=(coarse - fine) > (band_c + band_f)))
    out.tables.append(("mixing", ("n", "residual", "band"),
                       [(float(n_coarse), coarse, band_c),
                        (float(n_fine), fine, band_f)]))
    if cfg.plots:
        out.figures.append(lambda: plots.two_scale(
            [f"n={n_coarse}", f"n={n_fine}"], [coarse, fine], [band_c, band_f],
            out_dir, "mixing", ylabel="CF factorization residual"))
    return out


def _tail_quantile(model, tail_prob: float) -> float:
    """Threshold whose stationary tail mass is roughly tail_prob."""
    a, m = model.alpha, model.offspring_mean
    return (tail_prob * (1.0 - m ** a)) ** (-1.0 / a) - 1.0


def _check_tail_process(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    k = 1
    q_near, q_far = 2e-3, 5e-4
    reps = max(cfg.replications, int(240 / q_far))
    x_near, x_far = _tail_quantile(model, q_near), _tail_quantile(model, q_far)
    near = verify.tail_process_check(model, x_near, k, reps, rng)
    far = verify.tail_process_check(model, x_far, k, reps, rng)
    target = near["target"]
    tol = cfg.tolerance("tail_process", 0.10 * max(target, 0.5))
    out.rows.append(_row("tail_process", f"conditional_median_lag{k}",
                         far["median"], far["iqr"], target, tol))
    gap_near = abs(near["median"] - target)
    gap_far = abs(far["median"] - target)
    out.rows.append(_row("tail_process", "farther_threshold_closer",
                         gap_near - gap_far, 0.0, 0.0, 0.0,
                         passed=gap_far < gap_near))
    out.tables.append(("tail_process",
                       ("threshold", "median", "iqr", "hits", "target"),
                       [(x_near, near["median"], near["iqr"],
                         float(near["hits"]), target),
                        (x_far, far["median"], far["iqr"],
                         float(far["hits"]), target)]))
    return out


def _check_centering_limit(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    res = verify.centering_limit_check(model, cfg.n, 1.0, cfg.replications, rng)
    tol = cfg.tolerance("centering_limit", 0.15 * abs(res["target"]))
    out.rows.append(_row("centering_limit", f"scaled_centering_n{cfg.n}",
                         res["estimate"], res["stderr"], res["target"], tol))
    return out


def _check_fidis_ks(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    kind = cfg.centering_kind()
    a_n = norming_sequence(model, cfg.n)
    centering = partial_sum.resolve_centering(model, kind, a_n, rng=rng)
    t = 1.0 if not cfg.grid else cfg.grid[-1]
    reps = min(cfg.replications, 20_000)
    values = partial_sum.fidis_ensemble(model, cfg.n, t, reps, centering, rng)
    law0 = stable_law.limit_params(model.offspring_mean, model.alpha, kind)
    # fidi value at time t of a strictly stable process scales like t^(1/a)
    law = stable_law.StableParams(
        law0.alpha, law0.beta, law0.gamma * t ** (1.0 / model.alpha),
        law0.delta * t)
    ks = verify.ks_distance(values, law)
    default = 0.05 if model.alpha < 1.0 else 0.08
    tol = cfg.tolerance("fidis_ks", default)
    out.rows.append(_row("fidis_ks", f"ks_n{cfg.n}_t{t:g}_{kind}", ks, 0.0,
                         0.0, tol, passed=ks <= tol))
    qs = np.linspace(0.005, 0.995, 199)
    sample_q = np.quantile(values, qs)
    model_f = stable_law.stable_cdf(law, sample_q)
    out.tables.append(("fidis_ks_ecdf", ("x", "empirical", "model"),
                       [(sample_q[i], qs[i], model_f[i]) for i in range(qs.size)]))
    if cfg.plots:
        vals = np.asarray(values)
        out.figures.append(lambda: plots.ecdf_vs_cdf(
            vals, law, out_dir, "fidis_ks",
            title=f"scaled partial sum, n={cfg.n}, t={t:g}"))
    return out


def _check_stable_selftest(model, cfg, rng, out_dir) -> CheckOutput:
    out = CheckOutput()
    params = stable_law.limit_params(model.offspring_mean, model.alpha,
                                     "none" if model.alpha < 1 else "full")
    draws = stable_law.stable_sample(params, rng, size=min(cfg.replications,
                                                           200_000))
    ks = verify.ks_distance(draws, params)
    tol = cfg.tolerance("stable_selftest", 0.01)
    out.rows.append(_row("stable_selftest", "sampler_vs_cdf_ks", ks, 0.0, 0.0,
                         tol, passed=ks <= tol))
    grid = np.linspace(-5.0, 5.0, 21)
    dist, arg = verify.ecf_distance(draws, params, grid)
    out.rows.append(_row("stable_selftest", "ecf_sup_gap", dist, 0.0, 0.0, tol,
                         passed=dist <= tol))
    out.tables.append(("stable_selftest_ecf", ("theta", "gap"),
                       [(g, float(abs(np.exp(1j * g * draws).mean()
                                      - stable_law.stable_cf(params, g))))
                        for g in grid]))
    if cfg.plots:
        out.figures.append(lambda: plots.ecf_gap(
            draws, params, grid, out_dir, "stable_selftest_ecf"))
        out.figures.append(lambda: plots.ecdf_vs_cdf(
            draws, params, out_dir, "stable_selftest_cdf",
            title="sampler vs inverted CDF"))
    return out


_CHECKS = {
    "constants": _check_constants,
    "tail_ratio": _check_tail_ratio,
    "karamata": _check_karamata,
    "hill": _check_hill,
    "b_plus": _check_b_plus,
    "anti_clustering": _check_anti_clustering,
    "mixing": _check_mixing,
    "tail_process": _check_tail_process,
    "centering_limit": _check_centering_limit,
    "fidis_ks": _check_fidis_ks,
    "stable_selftest": _check_stable_selftest,
}

assert set(_CHECKS) == set(KNOWN_CHECKS)


# ---------------------------------------------------------------------------
# workflows
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, timed: bool = False
                   ) -> tuple[VerificationReport, list[str]]:
    """Run the configured check list; write the report and per-check files.

    Returns the in-memory report and the list of files written.  Outputs are
    byte-identical for identical (config, seed) unless ``timed`` is set.
    """
    model = cfg.model()
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.checks))
    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))

    def run_one(i: int) -> tuple[CheckOutput, float]:
        t0 = time.perf_counter()
        fn = _CHECKS[cfg.checks[i]]
        result = fn(model, cfg, np.random.default_rng(streams[i]), out_dir)
        return result, time.perf_counter() - t0

    if workers > 1 and len(cfg.checks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run_one, range(len(cfg.checks))))
    else:
        outputs = [run_one(i) for i in range(len(cfg.checks))]

    report = VerificationReport()
    files: list[str] = []
    for (result, elapsed) in outputs:
        for row in result.rows:
            row.seconds = elapsed
            report.add(row)
        for name, header, rows in result.tables:
            files.append(write_table(out_dir, name, header, rows))
        for render in result.figures:
            files.append(render())
    files.insert(0, write_report(report, out_dir, cfg.format, timed=timed))
    return report, files


def cmd_verify(cfg: ExperimentConfig, timed: bool) -> int:
    report, files = run_experiment(cfg, timed=timed)
    for row in report.rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"[{status}] {row.check_id}/{row.statistic}: "
              f"estimate={row.estimate:.6g} target={row.target:.6g} "
              f"tol={row.tolerance:.3g} ({row.seconds:.2f}s)", file=sys.stderr)
    print(files[0])
    return 0 if report.all_passed() else 1


def cmd_simulate(cfg: ExperimentConfig) -> int:
    model = cfg.model()
    out_rows = []
    for rep in range(cfg.replications):
        path = branching.simulate_path(model, cfg.n, cfg.seed, rep)
        out_rows.extend((float(rep), float(k), float(v))
                        for k, v in enumerate(path.values))
    path_file = write_table(cfg.out_dir, "paths", ("rep", "k", "value"), out_rows)
    print(path_file)
    if cfg.plots:
        first = branching.simulate_path(model, cfg.n, cfg.seed, 0)
        plots.path_plot(first.values, cfg.out_dir, "path_rep0")
    return 0


def cmd_aggregate(cfg: ExperimentConfig, timed: bool) -> int:
    model = cfg.model()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    kind = cfg.centering_kind()
    a_n = norming_sequence(model, cfg.n)
    centering = partial_sum.resolve_centering(model, kind, a_n, rng=rng)
    reps = min(cfg.replications, 5000)
    rows = []
    samples_by_t = {}
    for t in cfg.grid:
        values = partial_sum.fidis_ensemble(model, cfg.n, t, reps, centering,
                                            rng, copies=cfg.copies)
        samples_by_t[t] = values
        rows.extend((t, float(r), float(v)) for r, v in enumerate(values))
    files = [write_table(cfg.out_dir, "aggregate_samples",
                         ("t", "rep", "value"), rows)]
    t_last = cfg.grid[-1]
    law0 = stable_law.limit_params(model.offspring_mean, model.alpha, kind)
    law = stable_law.StableParams(law0.alpha, law0.beta,
                                  law0.gamma * t_last ** (1.0 / model.alpha),
                                  law0.delta * t_last)
    ks = verify.ks_distance(samples_by_t[t_last], law)
    tol = cfg.tolerance("fidis_ks", 0.1)
    report = VerificationReport()
    report.add(_row("aggregate", f"ks_N{cfg.copies}_n{cfg.n}_t{t_last:g}", ks,
                    0.0, 0.0, tol, passed=ks <= tol))
    files.insert(0, write_report(report, cfg.out_dir, cfg.format, timed=timed,
                                 name="aggregate_report"))
    if cfg.plots:
        files.append(plots.ecdf_vs_cdf(samples_by_t[t_last], law, cfg.out_dir,
                                       "aggregate_ecdf",
                                       title=f"N={cfg.copies} aggregate"))
    print(files[0])
    return 0 if report.all_passed() else 1


def cmd_constants(cfg: ExperimentConfig) -> int:
    m, a = cfg.offspring_mean, cfg.alpha
    cfg.model()  # validate
    ca = stable_law.c_alpha(a)
    K = stable_law.limit_scale_K(m, a)
    ba = stable_law.drift_b_alpha(m, a)
    gamma = (ca * K) ** (1.0 / a)
    rows = [("C_alpha", ca), ("K", K), ("b_alpha", ba), ("gamma_limit", gamma)]
    for name, value in rows:
        print(f"{name} = {value:.12g}")
    write_table(cfg.out_dir, "constants", ("name", "value"),
                [(n, v) for n, v in rows])
    seq = stable_law.b_plus_sequence(m, a, 20)
    write_table(cfg.out_dir, "b_plus", ("d", "b_plus", "increment"),
                [(i + 1.0, seq.values[i], seq.increments[i]) for i in range(20)])
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heavybranch",
        description="Simulate heavy-tailed branching processes and verify "
                    "their stable partial-sum limits.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "emit raw stationary paths"),
        ("verify", "run the configured check list"),
        ("aggregate", "pooled-copies aggregation workflow"),
        ("constants", "print the closed-form limit constants"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, metavar="U64")
        p.add_argument("--out", default=None, metavar="DIR")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--timed-report", action="store_true",
                       help="record measured runtimes in the report files "
                            "(breaks byte reproducibility)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = with_overrides(cfg, seed=args.seed, out_dir=args.out,
                             format=args.format)
        cfg.model()
        if args.command == "verify":
            return cmd_verify(cfg, args.timed_report)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "aggregate":
            return cmd_aggregate(cfg, args.timed_report)
        if args.command == "constants":
            return cmd_constants(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
