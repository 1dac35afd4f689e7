"""Acceptance suite: one test per numbered criterion, run with ``pytest -v``
so each criterion shows as a single pass/fail line.

Every test pins its tolerances inline, enforces its own wall-clock budget,
and checks the package against an independent route where one exists
(central finite differences, the in-repo Jacobi SVD, closed-form algebra
written out locally) rather than against the code under test.
"""

import itertools
import math
import re
import statistics
import textwrap
import time

import numpy as np

from lmopt import theory
from lmopt.config import parse_config
from lmopt.core import NormKind
from lmopt.harness import agg_path_for, coupling_report, execute_sweep, write_sweep_csv
from lmopt.linalg import polar_factor_jacobi
from lmopt.lmo import exact_lmo, lmo_spectral_approx, measure_delta
from lmopt.optimizer import (
    MomentumPolicy,
    OptimizerConfig,
    OracleSpec,
    StepPolicy,
    run,
)
from lmopt.polar import Normalization, PolarScheme
from lmopt.problems import (
    make_logistic,
    make_matrix_factorization,
    make_matrix_quadratic,
    make_quartic,
)
from oracle_helpers import fd_gradient, spectrum_matrix


def _newton_schulz(iterations: int) -> PolarScheme:
    return PolarScheme.newton_schulz(iterations, Normalization.SPECTRAL)


def _within_budget(t0: float, limit: float) -> float:
    elapsed = time.perf_counter() - t0
    assert elapsed < limit, f"took {elapsed:.2f}s, budget {limit:.0f}s"
    return elapsed


def _assert_nonincreasing(values, rel_slack: float = 1e-9) -> None:
    for prev, nxt in zip(values, values[1:]):
        assert nxt <= prev + rel_slack * max(1.0, abs(prev)), (
            f"sequence rose: {prev!r} -> {nxt!r}"
        )


def test_criterion_01_gradients_match_finite_differences():
    t0 = time.perf_counter()
    problems = [
        make_matrix_quadratic(6, 5, seed=1),
        make_logistic(12, 60, seed=2),
        make_matrix_factorization(5, 2, seed=3),
        make_quartic(7, seed=4),
    ]
    rng = np.random.default_rng(100)
    worst = 0.0
    for problem in problems:
        for _ in range(25):
            params = {b.name: rng.standard_normal(b.shape) for b in problem.blocks}
            analytic = problem.gradient(params)
            numeric = fd_gradient(problem, params)
            for name, ref in numeric.items():
                scale = max(1.0, float(np.max(np.abs(ref))))
                err = float(np.max(np.abs(analytic[name] - ref))) / scale
                worst = max(worst, err)
    assert worst <= 1e-6
    elapsed = _within_budget(t0, 10.0)
    print(f"criterion 01: worst relative gradient error {worst:.3e} <= 1e-6 "
          f"({elapsed:.2f}s < 10s)")


def test_criterion_02_exact_spectral_direction_matches_independent_svd():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        rows = int(rng.integers(1, 65))
        cols = int(rng.integers(1, 49))
        g = rng.standard_normal((rows, cols))
        direction = exact_lmo(g, NormKind.SPECTRAL).direction
        reference = -polar_factor_jacobi(g)
        worst = max(worst, float(np.linalg.norm(direction - reference, 2)))
    assert worst <= 1e-8
    elapsed = _within_budget(t0, 30.0)
    print(f"criterion 02: worst spectral-norm gap to Jacobi-SVD direction "
          f"{worst:.3e} <= 1e-8 ({elapsed:.2f}s < 30s)")


def test_criterion_03_measured_error_decreases_with_iterations():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mats = [spectrum_matrix(32, 32, rng, 0.1, 1.0) for _ in range(50)]
    means = []
    for iterations in (1, 3, 5, 8):
        scheme = _newton_schulz(iterations)
        vals = [
            measure_delta(g, lmo_spectral_approx(g, scheme), NormKind.SPECTRAL)
            for g in mats
        ]
        means.append(float(np.mean(vals)))
    assert means[0] > means[1] > means[2] > means[3], means
    assert means[3] < 0.1 * means[0]
    elapsed = _within_budget(t0, 60.0)
    print(f"criterion 03: mean measured error {means[0]:.3f} > {means[1]:.3f} > "
          f"{means[2]:.3f} > {means[3]:.4f}, last < 0.1*first ({elapsed:.2f}s < 60s)")


def test_criterion_04_best_gradient_bound_holds_on_every_run():
    t0 = time.perf_counter()
    problem = make_matrix_quadratic(8, 6, seed=5)
    smooth_l = problem.smoothness()["x"]
    gap = problem.initial_gap()
    base = theory.optimal_gamma_det(gap, 60, smooth_l, 0.0)[0]
    oracles = {"exact": None, "ns1": _newton_schulz(1), "ns5": _newton_schulz(5)}
    worst_margin = math.inf
    for factor in (0.1, 0.316, 1.0, 3.16, 10.0):
        for label, scheme in oracles.items():
            cfg = OptimizerConfig(
                step=StepPolicy.constant(base * factor),
                oracle=OracleSpec(scheme=scheme, measure_delta_every=1),
                run_id=f"bound_{label}_{factor:g}",
            )
            result = run(problem, cfg, steps=60)
            assert result.records
            gammas = [r.gamma_k for r in result.records]
            deltas = [r.delta_measured for r in result.records]
            bound = theory.bound_det_general(gammas, deltas, smooth_l, gap)
            best = min(r.grad_dual_norm for r in result.records)
            worst_margin = min(worst_margin, bound - best)
    assert worst_margin >= -1e-9
    elapsed = _within_budget(t0, 60.0)
    print(f"criterion 04: best-gradient bound held on all 15 runs, "
          f"worst margin {worst_margin:.3e} >= -1e-9 ({elapsed:.2f}s < 60s)")


def test_criterion_05_adaptive_step_descends_every_iteration():
    t0 = time.perf_counter()
    problem = make_matrix_quadratic(8, 6, seed=5)
    smooth_l = problem.smoothness()["x"]
    checked = 0
    for label, scheme in (("exact", None), ("ns1", _newton_schulz(1)),
                          ("ns5", _newton_schulz(5))):
        cfg = OptimizerConfig(
            step=StepPolicy.adaptive_smooth(smooth_l),
            oracle=OracleSpec(scheme=scheme, measure_delta_every=1),
            run_id=f"descent_{label}",
        )
        result = run(problem, cfg, steps=40)
        assert result.records
        losses = [r.loss for r in result.records] + [result.final_loss]
        for k, rec in enumerate(result.records):
            delta = rec.delta_measured
            required = (rec.grad_dual_norm ** 2 * (1.0 - delta) ** 2
                        / (2.0 * smooth_l * (1.0 + delta) ** 2))
            assert losses[k + 1] <= losses[k] - required + 1e-9, (
                f"{label} step {k}: {losses[k]} -> {losses[k + 1]}, "
                f"required descent {required}"
            )
            checked += 1
    elapsed = _within_budget(t0, 30.0)
    print(f"criterion 05: per-step descent held on {checked} steps across "
          f"3 oracle settings ({elapsed:.2f}s < 30s)")


def test_criterion_06_exact_oracle_reduction():
    t0 = time.perf_counter()
    for gap, steps, smooth_l in ((24.0, 60, 6.0), (1.0, 16, 1.0), (5.5, 123, 2.25)):
        gamma, rate = theory.optimal_gamma_det(gap, steps, smooth_l, 0.0)
        want_gamma = math.sqrt(2.0 * gap / (steps * smooth_l))
        want_rate = math.sqrt(2.0 * gap * smooth_l / steps)
        assert abs(gamma - want_gamma) <= 1e-12 * want_gamma
        assert abs(rate - want_rate) <= 1e-12 * want_rate

    problem = make_matrix_quadratic(6, 5, seed=7)
    oracle = OracleSpec(scheme=_newton_schulz(3), measure_delta_every=1)
    det = run(problem, OptimizerConfig(
        variant="deterministic", step=StepPolicy.constant(0.05),
        oracle=oracle, seed=0, run_id="reduction_det"), steps=30)
    sto = run(problem, OptimizerConfig(
        variant="stochastic", step=StepPolicy.constant(0.05),
        momentum=MomentumPolicy.constant(1.0),
        oracle=oracle, seed=0, run_id="reduction_sto"), steps=30)
    assert det.final_loss == sto.final_loss
    for name in det.final_params:
        assert np.array_equal(det.final_params[name], sto.final_params[name])
    assert [r.loss for r in det.records] == [r.loss for r in sto.records]
    assert ([r.grad_dual_norm for r in det.records]
            == [r.grad_dual_norm for r in sto.records])
    elapsed = _within_budget(t0, 10.0)
    print("criterion 06: zero-error step size and rate match closed forms to "
          f"1e-12; full-mixing noiseless run is bitwise deterministic "
          f"({elapsed:.2f}s < 10s)")


def test_criterion_07_closed_form_golden_values():
    t0 = time.perf_counter()
    tuning = theory.optimal_params_stochastic(1.0, 16, 1.0, 1.0, 1.0, 0.0)
    assert (tuning.gamma, tuning.alpha) == (0.125, 0.25)

    doc = theory.bound_stochastic.__doc__
    documented = [float(m) for m in re.findall(r"\d+\.\d{9,}", doc)]
    assert len(documented) == 1, "expected exactly one worked-example value"
    value = theory.bound_stochastic(
        initial_gap=1.0, steps=100, gamma=0.1, alpha=0.5,
        smooth_l=1.0, sigma=1.0, rho=1.0, delta=0.0)
    assert abs(value - documented[0]) <= 1e-9

    base = theory.complexity_glsmooth(1.0, 1.0, 1.0, 0.1, 0.0)
    degraded = theory.complexity_glsmooth(1.0, 1.0, 1.0, 0.1, 1.0 / 3.0)
    assert base == 220
    assert degraded == 880 == 4 * base
    elapsed = _within_budget(t0, 1.0)
    print(f"criterion 07: tuning (0.125, 0.25), worked example "
          f"{value:.15f}, step counts 220/880 ({elapsed:.2f}s < 1s)")


COUPLING_CONFIG = textwrap.dedent("""\
    [problem]
    name = logistic
    dim = 50
    samples = 384
    seed = 3
    flip = 0.12
    block_rows = 10
    block_cols = 5
    norm = spectral
    noise = additive
    sigma = 0.2

    [optimizer]
    variant = stochastic
    step = constant
    momentum = constant

    [oracle]
    kind = newton-schulz
    normalization = spectral
    measure_every = 20

    [run]
    steps = 2000

    [sweep]
    gammas = 9.3e-05 0.000311 0.00104 0.0035 0.0117 0.0392 0.1314 0.44
    alphas = 0.125 0.25 0.5 1.0
    oracle_iterations = 1 5
    seeds = 0 1 2 3 4
    output = sweep.csv
    """)


def test_criterion_08_coarser_oracle_prefers_smaller_steps():
    t0 = time.perf_counter()
    rows = execute_sweep(parse_config(COUPLING_CONFIG), workers=1)
    assert len(rows) == 8 * 4 * 2 * 5
    report = coupling_report(rows)
    assert not report.uninformative
    assert report.passed, report.detail
    fine, coarse = report.levels
    assert (fine.oracle_iters, coarse.oracle_iters) == (5, 1)
    assert coarse.best_gamma <= fine.best_gamma
    elapsed = _within_budget(t0, 600.0)
    print(f"criterion 08: best step {coarse.best_gamma:g} at 1 iteration "
          f"(mean error {coarse.mean_delta:.3f}) <= {fine.best_gamma:g} at "
          f"5 iterations (mean error {fine.mean_delta:.3f}) "
          f"({elapsed:.1f}s < 600s)")


def test_criterion_09_final_loss_nonincreasing_in_oracle_quality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    residual = spectrum_matrix(8, 6, rng, 2.5, 5.0)
    problem = make_matrix_quadratic(8, 6, target=-residual, x0=np.zeros((8, 6)))
    smooth_l = problem.smoothness()["x"]
    gamma = theory.optimal_gamma_det(problem.initial_gap(), 10_000, smooth_l, 0.0)[0]
    finals = []
    for iterations in (1, 3, 5, 8):
        cfg = OptimizerConfig(
            step=StepPolicy.constant(gamma),
            oracle=OracleSpec(scheme=_newton_schulz(iterations),
                              measure_delta_every=0),
            run_id=f"degrade_{iterations}",
        )
        finals.append(run(problem, cfg, steps=50).final_loss)
    _assert_nonincreasing(finals)
    elapsed = _within_budget(t0, 30.0)
    print("criterion 09: final losses "
          + " >= ".join(f"{v:.6f}" for v in finals)
          + f" across 1/3/5/8 iterations ({elapsed:.2f}s < 30s)")


def test_criterion_10_decaying_schedules_keep_improving():
    t0 = time.perf_counter()
    problem = make_logistic(20, 100, seed=11)
    checkpoints = (100, 1000, 10_000)
    per_seed = []
    for seed in range(10):
        cfg = OptimizerConfig(
            variant="stochastic",
            step=StepPolicy.time_varying(0.5),
            momentum=MomentumPolicy.time_varying(1.0),
            oracle=OracleSpec(measure_delta_every=0),
            seed=seed,
            run_id=f"sched_{seed}",
        )
        result = run(problem, cfg, steps=10_000)
        assert len(result.records) == 10_000
        duals = [r.grad_dual_norm for r in result.records]
        per_seed.append([min(duals[:c]) for c in checkpoints])
    medians = [statistics.median(mins[i] for mins in per_seed) for i in range(3)]
    assert medians[0] > medians[1] > medians[2], medians
    elapsed = _within_budget(t0, 300.0)
    print(f"criterion 10: median running-min gradient norm "
          f"{medians[0]:.4f} > {medians[1]:.4f} > {medians[2]:.6f} at "
          f"steps 100/1000/10000 ({elapsed:.1f}s < 300s)")


def test_criterion_11_layerwise_descent_and_bottleneck():
    t0 = time.perf_counter()
    problem = make_matrix_factorization(8, 3, seed=1)
    gap = problem.initial_gap()
    options = {0: None, 1: _newton_schulz(1), 5: _newton_schulz(5)}
    step = {"u": StepPolicy.adaptive_smooth(), "v": StepPolicy.adaptive_smooth()}
    mixes = 0
    for iters_u, iters_v in itertools.product(options, options):
        oracle = OracleSpec(
            per_block={"u": options[iters_u], "v": options[iters_v]},
            measure_delta_every=1,
        )
        cfg = OptimizerConfig(variant="layerwise", step=step, oracle=oracle,
                              run_id=f"layer_{iters_u}_{iters_v}")
        result = run(problem, cfg, steps=200)
        assert result.records
        losses = [r.loss for r in result.records] + [result.final_loss]
        _assert_nonincreasing(losses)
        mean_deltas = [
            float(np.mean([r.blocks[name].delta_measured for r in result.records]))
            for name in ("u", "v")
        ]
        factors = [((1.0 + d) / (1.0 - d)) ** 2 for d in mean_deltas]
        steps_needed, bottleneck = theory.complexity_layerwise(gap, 0.1, mean_deltas)
        assert bottleneck == int(np.argmax(factors))
        assert steps_needed >= 1
        mixes += 1
    assert mixes == 9
    elapsed = _within_budget(t0, 60.0)
    print(f"criterion 11: loss nonincreasing over 200 steps and bottleneck "
          f"block matched on all {mixes} oracle mixes ({elapsed:.2f}s < 60s)")


REPRO_CONFIG = textwrap.dedent("""\
    [problem]
    name = quadratic
    rows = 6
    cols = 5
    seed = 2
    sigma = 0.3

    [optimizer]
    variant = stochastic
    step = constant
    momentum = constant

    [oracle]
    kind = newton-schulz
    normalization = spectral
    measure_every = 5

    [run]
    steps = 40

    [sweep]
    gammas = 0.01 0.05 0.2
    alphas = 0.5 1.0
    oracle_iterations = 0 2
    seeds = 0 1
    output = sweep.csv
    """)


def test_criterion_12_sweeps_reproduce_across_worker_counts(tmp_path):
    t0 = time.perf_counter()
    cfg = parse_config(REPRO_CONFIG)
    single = tmp_path / "workers1.csv"
    pooled = tmp_path / "workers8.csv"
    write_sweep_csv(single, execute_sweep(cfg, workers=1))
    write_sweep_csv(pooled, execute_sweep(cfg, workers=8))
    assert single.read_bytes() == pooled.read_bytes()
    agg_single = tmp_path / agg_path_for(single).split("/")[-1]
    agg_pooled = tmp_path / agg_path_for(pooled).split("/")[-1]
    assert agg_single.read_bytes() == agg_pooled.read_bytes()
    elapsed = _within_budget(t0, 60.0)
    print(f"criterion 12: 24-row sweep byte-identical for 1 and 8 workers, "
          f"summary and aggregate CSVs ({elapsed:.2f}s < 60s)")
