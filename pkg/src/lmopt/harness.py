"""Batch drivers: single runs, parameter sweeps, coupling analysis, and
oracle-quality measurement, all emitting deterministic CSV files.

Determinism contract: given the same config, the emitted CSV bytes are
identical regardless of worker count.  Work items are computed in parallel
but rows are sorted by their grid coordinates before writing, and every
float is rendered with repr() so formatting is platform-stable.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, build_optimizer_config, build_oracle, build_problem
from .core import NormKind
from .errors import InsufficientGrid
from .lmo import lmo_spectral_approx, measure_delta
from .optimizer import (
    MomentumPolicy,
    OptimizerConfig,
    RunResult,
    StepPolicy,
    TraceRecord,
    run,
)
from .polar import Normalization, PolarScheme, apriori_error_bound, ErrorModelParams

__all__ = [
    "ENV_WORKERS",
    "TRACE_COLUMNS",
    "SWEEP_COLUMNS",
    "AGG_COLUMNS",
    "write_trace_csv",
    "read_trace_csv",
    "execute_run",
    "verify_trace",
    "SweepRow",
    "execute_sweep",
    "write_sweep_csv",
    "agg_path_for",
    "read_sweep_csv",
    "LevelSummary",
    "CouplingReport",
    "coupling_report",
    "DeltaSample",
    "measure_delta_profile",
    "random_spectrum_matrix",
]

ENV_WORKERS = "LMOPT_WORKERS"

TRACE_COLUMNS = (
    "run_id", "step", "loss", "grad_dual_norm", "momentum_err_dual",
    "delta_measured", "gamma_k", "alpha_k", "oracle_matmuls", "status",
)
SWEEP_COLUMNS = (
    "cell_id", "gamma", "alpha", "oracle_iters", "seed",
    "final_loss", "min_grad_dual", "mean_delta", "status",
)
AGG_COLUMNS = (
    "cell_id", "gamma", "alpha", "oracle_iters", "n_seeds",
    "median_final_loss", "median_min_grad_dual", "median_mean_delta", "status",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def write_trace_csv(path, records: list[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.run_id, rec.step, _cell(rec.loss), _cell(rec.grad_dual_norm),
                _cell(rec.momentum_err_dual), _cell(rec.delta_measured),
                _cell(rec.gamma_k), _cell(rec.alpha_k), rec.oracle_matmuls, rec.status,
            ])


def read_trace_csv(path) -> list[TraceRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(TraceRecord(
                run_id=row["run_id"],
                step=int(row["step"]),
                loss=float(row["loss"]),
                grad_dual_norm=float(row["grad_dual_norm"]),
                momentum_err_dual=_opt_float(row["momentum_err_dual"]),
                delta_measured=_opt_float(row["delta_measured"]),
                gamma_k=float(row["gamma_k"]),
                alpha_k=_opt_float(row["alpha_k"]),
                oracle_matmuls=int(row["oracle_matmuls"]),
                status=row["status"],
            ))
    return records


def execute_run(cfg: RunConfig) -> list[tuple[int, RunResult]]:
    """One optimizer run per seed in [run] seeds; returns (seed, result) pairs."""
    out = []
    for seed in cfg.run.seeds:
        problem = build_problem(cfg.problem)
        run_id = f"{cfg.problem.name}-{cfg.optimizer.variant}-s{seed}"
        opt_cfg = build_optimizer_config(cfg, seed=seed, run_id=run_id)
        out.append((seed, run(problem, opt_cfg, cfg.run.steps)))
    return out


def verify_trace(cfg: RunConfig, trace_path, smooth_l: float | None = None):
    """Re-check theoretical guarantees against a recorded trace file.

    The trace may hold several runs (one per seed); each run_id group is
    verified independently and all reports are returned.  `smooth_l`
    overrides the certified smoothness constant, which is how a deliberately
    wrong certificate is caught.
    """
    from .theory import verify_bounds

    groups: dict[str, list[TraceRecord]] = {}
    for rec in read_trace_csv(trace_path):
        groups.setdefault(rec.run_id, []).append(rec)
    reports = []
    for run_id in sorted(groups):
        recs = sorted(groups[run_id], key=lambda r: r.step)
        problem = build_problem(cfg.problem)
        opt_cfg = build_optimizer_config(cfg, seed=0, run_id=run_id)
        reports.extend(verify_bounds(recs, problem, opt_cfg, smooth_l=smooth_l))
    return reports


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    key: tuple[int, int, int, int]   # (gamma idx, alpha idx, oracle idx, seed)
    cell_id: str
    gamma: float
    alpha: float
    oracle_iters: int
    seed: int
    final_loss: float
    min_grad_dual: float
    mean_delta: float | None
    status: str


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(ENV_WORKERS, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def _run_cell(cfg: RunConfig, key, cell_id, gamma, alpha, oracle_iters, seed) -> SweepRow:
    problem = build_problem(cfg.problem)
    if cfg.optimizer.step == "constant":
        step = StepPolicy.constant(gamma)
    elif cfg.optimizer.step == "time-varying":
        step = StepPolicy.time_varying(gamma)
    else:
        step = build_optimizer_config(cfg, seed, "tmp").step
    if cfg.optimizer.momentum == "time-varying":
        momentum = MomentumPolicy.time_varying(alpha)
    elif cfg.optimizer.momentum == "constant" or cfg.optimizer.variant == "stochastic":
        momentum = MomentumPolicy.constant(alpha)
    else:
        momentum = MomentumPolicy.none()
    opt_cfg = OptimizerConfig(
        variant=cfg.optimizer.variant,
        step=step,
        momentum=momentum,
        oracle=build_oracle(cfg.oracle, iterations=oracle_iters),
        seed=seed,
        run_id=cell_id + f"_s{seed}",
    )
    result = run(problem, opt_cfg, cfg.run.steps)
    duals = [r.grad_dual_norm for r in result.records]
    deltas = [r.delta_measured for r in result.records if r.delta_measured is not None]
    return SweepRow(
        key=key,
        cell_id=cell_id,
        gamma=gamma,
        alpha=alpha,
        oracle_iters=oracle_iters,
        seed=seed,
        final_loss=result.final_loss,
        min_grad_dual=min(duals) if duals else math.nan,
        mean_delta=(sum(deltas) / len(deltas)) if deltas else None,
        status=result.status,
    )


def execute_sweep(cfg: RunConfig, workers: int | None = None) -> list[SweepRow]:
    if cfg.sweep is None:
        raise InsufficientGrid("config has no [sweep] section")
    sw = cfg.sweep
    jobs = []
    for gi, gamma in enumerate(sw.gammas):
        for ai, alpha in enumerate(sw.alphas):
            for oi, oracle_iters in enumerate(sw.oracle_iterations):
                cell_id = f"g{gi:02d}_a{ai:02d}_o{oi:02d}"
                for seed in sw.seeds:
                    jobs.append(((gi, ai, oi, seed), cell_id, gamma, alpha, oracle_iters, seed))
    n_workers = _worker_count(workers)
    if n_workers == 1:
        rows = [_run_cell(cfg, *job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(lambda job: _run_cell(cfg, *job), jobs))
    rows.sort(key=lambda r: r.key)
    return rows


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([
                r.cell_id, _cell(r.gamma), _cell(r.alpha), r.oracle_iters, r.seed,
                _cell(r.final_loss), _cell(r.min_grad_dual), _cell(r.mean_delta), r.status,
            ])
    _write_agg_csv(agg_path_for(path), rows)


def agg_path_for(path) -> str:
    text = str(path)
    if text.endswith(".csv"):
        return text[:-4] + ".agg.csv"
    return text + ".agg.csv"


def _write_agg_csv(path, rows: list[SweepRow]) -> None:
    cells: dict[str, list[SweepRow]] = {}
    for r in rows:
        cells.setdefault(r.cell_id, []).append(r)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGG_COLUMNS)
        for cell_id in sorted(cells):
            group = cells[cell_id]
            deltas = [r.mean_delta for r in group if r.mean_delta is not None]
            status = "ok" if all(r.status in ("ok", "converged") for r in group) else "diverged"
            writer.writerow([
                cell_id, _cell(group[0].gamma), _cell(group[0].alpha),
                group[0].oracle_iters, len(group),
                _cell(statistics.median(r.final_loss for r in group)),
                _cell(statistics.median(r.min_grad_dual for r in group)),
                _cell(statistics.median(deltas)) if deltas else "",
                status,
            ])


def read_sweep_csv(path) -> list[SweepRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append(SweepRow(
                key=(0, 0, 0, int(row["seed"])),
                cell_id=row["cell_id"],
                gamma=float(row["gamma"]),
                alpha=float(row["alpha"]),
                oracle_iters=int(row["oracle_iters"]),
                seed=int(row["seed"]),
                final_loss=float(row["final_loss"]),
                min_grad_dual=float(row["min_grad_dual"]),
                mean_delta=_opt_float(row["mean_delta"]),
                status=row["status"],
            ))
    return rows


# ---------------------------------------------------------------------------
# Coupling between oracle quality and the best step size
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSummary:
    oracle_iters: int
    mean_delta: float
    best_gamma: float
    best_alpha: float
    best_loss: float
    flat: bool   # every (gamma, alpha) cell ties at this level


@dataclass(frozen=True)
class CouplingReport:
    levels: tuple[LevelSummary, ...]
    passed: bool
    uninformative: bool
    alpha_nondecreasing: bool
    detail: str = ""


def coupling_report(rows: list[SweepRow], tie_rel: float = 1e-12) -> CouplingReport:
    """Check that coarser oracles prefer equal-or-smaller step sizes.

    Oracle levels are ordered by measured inexactness (ascending).  For each
    level, the best step size is the gamma minimizing the median-over-seeds
    final loss, minimized over momentum values.  The check passes when the
    best gamma is nonincreasing along that ordering, with ties allowed.
    A level whose cells all tie is "flat": it cannot order anything and is
    skipped (flagged uninformative rather than failed).
    """
    by_level: dict[int, list[SweepRow]] = {}
    for r in rows:
        by_level.setdefault(r.oracle_iters, []).append(r)
    if len(by_level) < 2:
        raise InsufficientGrid("need at least two oracle-quality levels")
    gammas = sorted({r.gamma for r in rows})
    if len(gammas) < 2:
        raise InsufficientGrid("need at least two gamma values")

    levels = []
    for oracle_iters, group in by_level.items():
        deltas = [r.mean_delta for r in group if r.mean_delta is not None]
        mean_delta = sum(deltas) / len(deltas) if deltas else 0.0
        # median over seeds per (gamma, alpha) cell
        cell_losses: dict[tuple[float, float], list[float]] = {}
        for r in group:
            cell_losses.setdefault((r.gamma, r.alpha), []).append(r.final_loss)
        medians = {k: statistics.median(v) for k, v in cell_losses.items()}
        per_gamma = {}
        per_alpha = {}
        for (g, a), loss in medians.items():
            if g not in per_gamma or loss < per_gamma[g]:
                per_gamma[g] = loss
            if a not in per_alpha or loss < per_alpha[a]:
                per_alpha[a] = loss
        lo, hi = min(medians.values()), max(medians.values())
        flat = hi - lo <= tie_rel * max(1.0, abs(hi))
        best_gamma = min(sorted(per_gamma), key=lambda g: per_gamma[g])
        best_alpha = min(sorted(per_alpha), key=lambda a: per_alpha[a])
        levels.append(LevelSummary(
            oracle_iters=oracle_iters, mean_delta=mean_delta,
            best_gamma=best_gamma, best_alpha=best_alpha,
            best_loss=min(medians.values()), flat=flat,
        ))
    levels.sort(key=lambda lv: (lv.mean_delta, lv.oracle_iters))

    informative = [lv for lv in levels if not lv.flat]
    uninformative = len(informative) < 2
    passed = True
    detail = ""
    for prev, cur in zip(informative, informative[1:]):
        if cur.best_gamma > prev.best_gamma:
            passed = False
            detail = (
                f"best gamma rose from {prev.best_gamma!r} (delta~{prev.mean_delta:.3g}) "
                f"to {cur.best_gamma!r} (delta~{cur.mean_delta:.3g})"
            )
            break
    alpha_ok = all(
        cur.best_alpha >= prev.best_alpha
        for prev, cur in zip(informative, informative[1:])
    )
    return CouplingReport(
        levels=tuple(levels), passed=passed,
        uninformative=uninformative, alpha_nondecreasing=alpha_ok, detail=detail,
    )


# ---------------------------------------------------------------------------
# Oracle quality measurement on synthetic spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaSample:
    iterations: int
    mean_measured: float
    max_measured: float
    bound: float | None   # a-priori bound when the spectrum range is known


def random_spectrum_matrix(rows: int, cols: int, rng, sigma_range=(0.1, 1.0)):
    """Random matrix with singular values drawn uniformly from sigma_range."""
    k = min(rows, cols)
    u, _ = np.linalg.qr(rng.standard_normal((rows, k)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, k)))
    s = rng.uniform(sigma_range[0], sigma_range[1], size=k)
    s[rng.integers(k)] = sigma_range[1]   # pin the top so the range is realized
    return u @ np.diag(s) @ v.T


def measure_delta_profile(
    rows: int = 32,
    cols: int = 32,
    iteration_counts=(1, 3, 5, 8),
    trials: int = 50,
    seed: int = 0,
    sigma_range=(0.1, 1.0),
    normalization: Normalization = Normalization.SPECTRAL,
) -> list[DeltaSample]:
    """Measured inexactness of the iterative polar oracle vs iteration count.

    Returns one row per iteration count with the mean and max measured delta
    over `trials` random matrices whose singular values span sigma_range.
    Under spectral-norm scaling the normalized spectrum lies in
    [sigma_min/sigma_max, 1], so the a-priori cubic-iteration bound applies
    with ell = sigma_min/sigma_max.
    """
    rng = np.random.default_rng(seed)
    mats = [random_spectrum_matrix(rows, cols, rng, sigma_range) for _ in range(trials)]
    ell = sigma_range[0] / sigma_range[1]
    out = []
    for count in iteration_counts:
        scheme = PolarScheme.newton_schulz(count, normalization)
        measured = []
        for g in mats:
            res = lmo_spectral_approx(g, scheme)
            measure_delta(g, res, NormKind.SPECTRAL)
            measured.append(res.measured_delta)
        bound = None
        if normalization is Normalization.SPECTRAL:
            bound = apriori_error_bound(ErrorModelParams(ell=ell, q=1, p=count))
        out.append(DeltaSample(
            iterations=count,
            mean_measured=float(np.mean(measured)),
            max_measured=float(np.max(measured)),
            bound=bound,
        ))
    return out
