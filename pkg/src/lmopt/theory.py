"""Convergence-rate calculators and bound verification against run traces.

Every function evaluates a closed-form guarantee for norm-constrained
steepest descent under a relative oracle error delta in [0, 1).  Gradient
quality degrades the guarantees through the two factors (1 + delta) (update
inflation) and 1/(1 - delta) (descent loss); all formulas are monotone
adverse in delta.

verify_bounds replays a recorded trace against the guarantees its
configuration makes checkable.  Deterministic runs with trustworthy
per-step deltas (exact oracle, or errors measured at every step) produce
hard pass/fail reports; stochastic runs produce advisory reports because a
single trajectory cannot certify an expectation bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInexactness, MissingCertificate

__all__ = [
    "BoundInputs",
    "BoundReport",
    "bound_det_general",
    "bound_det_constant",
    "optimal_gamma_det",
    "complexity_det",
    "adaptive_bound_det",
    "adaptive_rate_det",
    "StochasticTuning",
    "optimal_params_stochastic",
    "bound_stochastic",
    "momentum_error_steady_state",
    "complexity_glsmooth",
    "complexity_layerwise",
    "verify_bounds",
]

# hard bound checks allow one part in 1e9 of float slack
RELATIVE_SLACK = 1e-9


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not (0.0 <= delta < 1.0):
        raise InvalidInexactness(f"relative oracle error must be in [0, 1), got {delta}")
    return delta


def _guarded_ceil(value: float) -> int:
    """Ceiling that forgives last-ulp float excess on exact integers."""
    return int(math.ceil(value - 1e-9 * max(1.0, abs(value))))


@dataclass(frozen=True)
class BoundInputs:
    """Shared ingredients of the guarantees for one run."""

    initial_gap: float
    steps: int
    smooth_l: float | None = None
    sigma: float = 0.0
    rho: float = 1.0
    delta: float = 0.0


@dataclass
class BoundReport:
    """Outcome of checking one guarantee against one run."""

    name: str
    theoretical: float
    empirical: float
    satisfied: bool
    margin: float
    advisory: bool = False
    detail: str = ""


def _report(name: str, theoretical: float, empirical: float,
            advisory: bool = False, detail: str = "") -> BoundReport:
    ok = empirical <= theoretical * (1.0 + RELATIVE_SLACK) + 1e-300
    return BoundReport(
        name=name,
        theoretical=theoretical,
        empirical=empirical,
        satisfied=bool(ok),
        margin=theoretical - empirical,
        advisory=advisory,
        detail=detail,
    )


def bound_det_general(gammas, deltas, smooth_l: float, initial_gap: float) -> float:
    """Guaranteed bound on the best gradient dual norm of a deterministic run.

        (gap + (L/2) * sum gamma_k^2 (1 + delta_k)^2) / sum gamma_k (1 - delta_k)
    """
    gammas = [float(g) for g in gammas]
    deltas = [_check_delta(d) for d in deltas]
    if len(gammas) != len(deltas):
        raise ValueError(f"{len(gammas)} step sizes vs {len(deltas)} deltas")
    if not gammas:
        raise ValueError("need at least one step")
    if any(g <= 0 for g in gammas):
        raise ValueError("step sizes must be positive")
    if smooth_l <= 0 or initial_gap < 0:
        raise ValueError("need smooth_l > 0 and initial_gap >= 0")
    num = initial_gap + 0.5 * smooth_l * sum(
        g * g * (1.0 + d) ** 2 for g, d in zip(gammas, deltas)
    )
    den = sum(g * (1.0 - d) for g, d in zip(gammas, deltas))
    return num / den


def bound_det_constant(gamma: float, delta: float, smooth_l: float,
                       initial_gap: float, steps: int) -> float:
    """bound_det_general specialized to constant step size and constant delta."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    return bound_det_general([gamma] * steps, [delta] * steps, smooth_l, initial_gap)


def optimal_gamma_det(initial_gap: float, steps: int, smooth_l: float,
                      delta: float) -> tuple[float, float]:
    """Horizon-optimal constant step size and the rate it certifies.

    gamma* = sqrt(2 gap / (steps L)) / (1 + delta)
    rate   = ((1 + delta) / (1 - delta)) * sqrt(2 gap L / steps)
    """
    delta = _check_delta(delta)
    if steps < 1 or smooth_l <= 0 or initial_gap < 0:
        raise ValueError("need steps >= 1, smooth_l > 0, initial_gap >= 0")
    gamma = math.sqrt(2.0 * initial_gap / (steps * smooth_l)) / (1.0 + delta)
    rate = (1.0 + delta) / (1.0 - delta) * math.sqrt(2.0 * initial_gap * smooth_l / steps)
    return gamma, rate


def complexity_det(initial_gap: float, smooth_l: float, eps: float, delta: float) -> int:
    """Steps guaranteeing best gradient dual norm <= eps with the optimal step."""
    delta = _check_delta(delta)
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    q = ((1.0 + delta) / (1.0 - delta)) ** 2
    return _guarded_ceil(2.0 * initial_gap * smooth_l * q / eps ** 2)


def adaptive_bound_det(deltas, smooth_l: float, initial_gap: float,
                       steps: int | None = None) -> float:
    """Bound on the best SQUARED gradient dual norm of the adaptive-step run.

        min_k dual_k^2  <=  2 L gap / sum_k ((1 - delta_k)^2 / (1 + delta_k)^2)
    """
    deltas = [_check_delta(d) for d in deltas]
    if steps is not None and steps != len(deltas):
        raise ValueError(f"steps={steps} but got {len(deltas)} deltas")
    if not deltas:
        raise ValueError("need at least one step")
    if smooth_l <= 0 or initial_gap < 0:
        raise ValueError("need smooth_l > 0 and initial_gap >= 0")
    weight = sum(((1.0 - d) / (1.0 + d)) ** 2 for d in deltas)
    return 2.0 * smooth_l * initial_gap / weight


def adaptive_rate_det(initial_gap: float, steps: int, smooth_l: float,
                      delta: float) -> float:
    """Constant-delta adaptive rate ((1+delta)/(1-delta)) sqrt(2 L gap / steps)."""
    delta = _check_delta(delta)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    return (1.0 + delta) / (1.0 - delta) * math.sqrt(2.0 * smooth_l * initial_gap / steps)


@dataclass(frozen=True)
class StochasticTuning:
    """Horizon-optimal stochastic hyperparameters and the certified rate.

    gamma/alpha use the closed-form shapes with the dual-compatibility factor
    rho folded into the noise level (at rho = 1 they reduce to the plain
    sigma forms, exposed as gamma_sigma_only/alpha_sigma_only).  rate is the
    dominant horizon term with its explicit 2^(9/4) constant.  alpha is
    clamped to 1 when the horizon is too short for the tuning to be interior;
    `clamped` records that.
    """

    gamma: float
    alpha: float
    rate: float
    clamped: bool
    gamma_sigma_only: float
    alpha_sigma_only: float


def optimal_params_stochastic(initial_gap: float, steps: int, smooth_l: float,
                              sigma: float, rho: float = 1.0,
                              delta: float = 0.0) -> StochasticTuning:
    """Tune (gamma, alpha) for the momentum method on a fixed horizon.

    gamma* = (gap/steps)^(3/4) * (noise^2 L (1+delta))^(-1/4)
    alpha* = sqrt(gap L (1+delta) / (steps noise^2)),  noise = rho * sigma
    """
    delta = _check_delta(delta)
    if steps < 1 or smooth_l <= 0 or initial_gap < 0 or sigma <= 0 or rho <= 0:
        raise ValueError("need steps >= 1, smooth_l > 0, initial_gap >= 0, sigma > 0, rho > 0")

    def _pair(noise: float) -> tuple[float, float]:
        gamma = (initial_gap / steps) ** 0.75 * (noise ** 2 * smooth_l * (1.0 + delta)) ** -0.25
        alpha = math.sqrt(initial_gap * smooth_l * (1.0 + delta) / (steps * noise ** 2))
        return gamma, alpha

    gamma, alpha = _pair(rho * sigma)
    gamma_s, alpha_s = _pair(sigma)
    clamped = alpha > 1.0
    rate = (2.0 ** 2.25 * initial_gap ** 0.25 * (rho * sigma) ** 0.5
            * (smooth_l * (1.0 + delta)) ** 0.25 / (steps ** 0.25 * (1.0 - delta)))
    return StochasticTuning(
        gamma=gamma,
        alpha=min(alpha, 1.0),
        rate=rate,
        clamped=clamped,
        gamma_sigma_only=gamma_s,
        alpha_sigma_only=min(alpha_s, 1.0),
    )


def bound_stochastic(initial_gap: float, steps: int, gamma: float, alpha: float,
                     smooth_l: float, sigma: float, rho: float = 1.0,
                     delta: float = 0.0) -> float:
    """Bound on the mean expected gradient dual norm of the momentum method.

        (1/(1-delta)) * [ gap/(steps*gamma) + 2 rho sigma (1/(alpha steps) + sqrt(alpha))
                          + L gamma ((7+3 delta)/2 + 2(1+delta)/alpha) ]

    Worked example: initial_gap=1, steps=100, gamma=0.1, alpha=0.5,
    smooth_l=1, sigma=1, rho=1, delta=0 gives
    0.1 + 2*(0.02 + sqrt(0.5)) + 0.1*(3.5 + 4) = 2.304213562373095.
    """
    delta = _check_delta(delta)
    if steps < 1 or gamma <= 0 or not (0.0 < alpha <= 1.0):
        raise ValueError("need steps >= 1, gamma > 0, alpha in (0, 1]")
    if smooth_l <= 0 or initial_gap < 0 or sigma < 0 or rho <= 0:
        raise ValueError("need smooth_l > 0, initial_gap >= 0, sigma >= 0, rho > 0")
    noise = rho * sigma
    return (
        initial_gap / (steps * gamma)
        + 2.0 * noise * (1.0 / (alpha * steps) + math.sqrt(alpha))
        + smooth_l * gamma * ((7.0 + 3.0 * delta) / 2.0 + 2.0 * (1.0 + delta) / alpha)
    ) / (1.0 - delta)


def momentum_error_steady_state(k: int, rho: float, sigma: float, alpha: float,
                                smooth_l: float, gamma: float, delta: float) -> float:
    """Bound on the expected dual-norm momentum error after k+1 constant steps.

        (1-alpha)^(k+1) rho sigma + rho sigma sqrt(alpha)/sqrt(2-alpha)
        + L gamma (1+delta)/alpha
    """
    delta = _check_delta(delta)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return (
        (1.0 - alpha) ** (k + 1) * rho * sigma
        + rho * sigma * math.sqrt(alpha) / math.sqrt(2.0 - alpha)
        + smooth_l * gamma * (1.0 + delta) / alpha
    )


def complexity_glsmooth(initial_gap: float, l0: float, l1: float, eps: float,
                        delta: float) -> int:
    """Steps guaranteeing best gradient dual norm <= eps under (l0, l1)-smoothness.

        ceil( 2 gap ((1+delta)/(1-delta))^2 (l0/eps^2 + l1/eps) )
    """
    delta = _check_delta(delta)
    if eps <= 0 or initial_gap < 0 or l0 < 0 or l1 < 0 or (l0 == 0 and l1 == 0):
        raise ValueError("need eps > 0, initial_gap >= 0, l0, l1 >= 0 not both zero")
    q = ((1.0 + delta) / (1.0 - delta)) ** 2
    return _guarded_ceil(2.0 * initial_gap * q * (l0 / eps ** 2 + l1 / eps))


def complexity_layerwise(initial_gap: float, eps: float, deltas) -> tuple[int, int]:
    """Steps to reach eps in the layer-wise method, and the bottleneck block.

    The count is driven by the worst per-block error factor:
        ceil( (2 gap / eps^2) * max_j ((1+delta_j)/(1-delta_j))^2 )
    Returns (steps, index of the argmax block).
    """
    deltas = [_check_delta(d) for d in deltas]
    if not deltas:
        raise ValueError("need at least one block delta")
    if eps <= 0 or initial_gap < 0:
        raise ValueError("need eps > 0 and initial_gap >= 0")
    factors = [((1.0 + d) / (1.0 - d)) ** 2 for d in deltas]
    bottleneck = int(np.argmax(factors))
    return _guarded_ceil(2.0 * initial_gap * factors[bottleneck] / eps ** 2), bottleneck


def _trustworthy_deltas(records, oracle_exact: bool, measure_every: int) -> bool:
    if oracle_exact:
        return True
    if measure_every != 1:
        return False
    return all(r.delta_measured is not None for r in records)


def verify_bounds(records, problem, config, smooth_l: float | None = None) -> list[BoundReport]:
    """Check the guarantees a recorded run makes testable.

    records: TraceRecord list from optimizer.run.
    config: the OptimizerConfig that produced it.
    smooth_l: optional override of the problem's certificate (a deliberately
    wrong value makes the per-step descent check fail, which is the point of
    allowing the override).

    Raises MissingCertificate when a needed smoothness constant is neither
    provided nor certified by the problem.
    """
    from .core import norm_compat_rho  # local import to avoid cycle at module load
    from .optimizer import StepKind, StepPolicy

    if not records:
        return []

    reports: list[BoundReport] = []
    stochastic = config.variant == "stochastic"
    uniform_policy = config.step if isinstance(config.step, StepPolicy) else None
    oracle_exact = config.oracle.scheme is None and all(
        v is None for v in config.oracle.per_block.values()
    )

    if smooth_l is None:
        try:
            per_block = problem.smoothness(problem.initial_params())
            smooth_l = max(per_block.values())
        except MissingCertificate:
            smooth_l = None

    gap = records[0].loss - problem.f_star
    gammas = [r.gamma_k for r in records]
    deltas = [r.delta_measured if r.delta_measured is not None else 0.0 for r in records]
    duals = [r.grad_dual_norm for r in records]
    hard = _trustworthy_deltas(records, oracle_exact, config.oracle.measure_delta_every)

    if not stochastic:
        if smooth_l is None:
            raise MissingCertificate(
                f"{problem.name}: no smoothness certificate for deterministic bound checks"
            )
        reports.append(_report(
            "best_grad_dual_bound",
            bound_det_general(gammas, deltas, smooth_l, gap),
            min(duals),
            advisory=not hard,
            detail="best observed gradient dual norm vs the general deterministic bound",
        ))
        if uniform_policy is not None and uniform_policy.kind is StepKind.ADAPTIVE_SMOOTH:
            worst = -math.inf
            for prev, nxt in zip(records, records[1:]):
                d = prev.delta_measured if prev.delta_measured is not None else 0.0
                required = (prev.grad_dual_norm ** 2 * (1.0 - d) ** 2
                            / (2.0 * smooth_l * (1.0 + d) ** 2))
                worst = max(worst, nxt.loss - prev.loss + required)
            if math.isfinite(worst):
                reports.append(BoundReport(
                    name="per_step_descent",
                    theoretical=RELATIVE_SLACK,
                    empirical=worst,
                    satisfied=worst <= RELATIVE_SLACK,
                    margin=RELATIVE_SLACK - worst,
                    advisory=not hard,
                    detail="max over steps of (next loss - guaranteed descent excess)",
                ))
    else:
        block = problem.blocks[0]
        rho = norm_compat_rho(block.norm, block.shape)
        if (uniform_policy is not None and uniform_policy.kind is StepKind.CONSTANT
                and config.momentum.kind.value == "constant" and smooth_l is not None
                and problem.sigma > 0):
            theo = bound_stochastic(
                gap, len(records), uniform_policy.gamma, config.momentum.alpha,
                smooth_l, problem.sigma, rho,
                max(deltas) if deltas else 0.0,
            )
            emp = float(np.mean(duals[1:])) if len(duals) > 1 else duals[0]
            reports.append(_report(
                "mean_grad_dual_bound",
                theo,
                emp,
                advisory=True,
                detail="single-trajectory mean vs the expectation bound (advisory)",
            ))
            last = records[-1]
            if last.momentum_err_dual is not None:
                theo_m = momentum_error_steady_state(
                    last.step, rho, problem.sigma, config.momentum.alpha,
                    smooth_l, uniform_policy.gamma,
                    max(deltas) if deltas else 0.0,
                )
                reports.append(_report(
                    "momentum_error_steady_state",
                    theo_m,
                    last.momentum_err_dual,
                    advisory=True,
                    detail="final momentum error vs its steady-state bound (advisory)",
                ))
    return reports
