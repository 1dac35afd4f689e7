"""Norm-constrained steepest-descent loops driven by (possibly inexact) oracles.

Updates have the form  x_{k+1} = x_k + gamma_k * d_k  where d_k comes from a
unit-ball direction oracle on the current gradient (deterministic variant),
on a momentum average of stochastic gradients (stochastic variant), or
per-block with separate policies (layer-wise variant).  Oracle error feeds
the step rules through measured values: fresh when scheduled, else the last
measurement, else the oracle's declared bound, else zero.

All variants share one step engine, so a single-block layer-wise run is
bitwise identical to the deterministic run, and a stochastic run with
mixing 1 and noise level 0 is bitwise identical to the deterministic run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import NormKind, ParamBlock, dual_norm
from .errors import (
    ConfigError,
    DegenerateGradient,
    InvalidInexactness,
    MissingBlockPolicy,
    NonFiniteValue,
    SchemeDiverged,
)
from .lmo import exact_lmo, lmo_spectral_approx, measure_delta
from .polar import PolarScheme
from .problems import Problem

__all__ = [
    "CONVERGENCE_THRESHOLD",
    "StepKind",
    "StepPolicy",
    "MomentumKind",
    "MomentumPolicy",
    "OracleSpec",
    "OptimizerState",
    "OptimizerConfig",
    "BlockTrace",
    "TraceRecord",
    "RunResult",
    "momentum_update",
    "glsmooth_step_size",
    "adaptive_step_size",
    "step_deterministic",
    "step_stochastic",
    "step_layerwise",
    "initial_state",
    "run",
]

# true-gradient dual norm below this ends the run with status "converged"
CONVERGENCE_THRESHOLD = 1e-14

GAMMA_DECAY = 0.75  # time-varying step exponent: gamma / (k+1)^0.75
ALPHA_DECAY = 0.5   # time-varying mixing exponent: alpha / (k+1)^0.5


class StepKind(enum.Enum):
    CONSTANT = "constant"
    ADAPTIVE_SMOOTH = "adaptive"
    ADAPTIVE_GENERALIZED = "adaptive-gl"
    TIME_VARYING = "time-varying"


@dataclass(frozen=True)
class StepPolicy:
    """Step-size rule.  Missing smoothness constants are pulled from the
    problem's certificates at each step (local constants stay valid along
    the trajectory)."""

    kind: StepKind
    gamma: float = 0.0
    smooth_l: float | None = None
    l0: float | None = None
    l1: float | None = None

    @classmethod
    def constant(cls, gamma: float) -> "StepPolicy":
        if gamma <= 0:
            raise ValueError(f"constant step size must be positive, got {gamma}")
        return cls(StepKind.CONSTANT, gamma=gamma)

    @classmethod
    def adaptive_smooth(cls, smooth_l: float | None = None) -> "StepPolicy":
        if smooth_l is not None and smooth_l <= 0:
            raise ValueError(f"smoothness constant must be positive, got {smooth_l}")
        return cls(StepKind.ADAPTIVE_SMOOTH, smooth_l=smooth_l)

    @classmethod
    def adaptive_generalized(cls, l0: float | None = None,
                             l1: float | None = None) -> "StepPolicy":
        return cls(StepKind.ADAPTIVE_GENERALIZED, l0=l0, l1=l1)

    @classmethod
    def time_varying(cls, gamma: float) -> "StepPolicy":
        if gamma <= 0:
            raise ValueError(f"base step size must be positive, got {gamma}")
        return cls(StepKind.TIME_VARYING, gamma=gamma)


class MomentumKind(enum.Enum):
    NONE = "none"
    CONSTANT = "constant"
    TIME_VARYING = "time-varying"


@dataclass(frozen=True)
class MomentumPolicy:
    """Gradient-averaging rule; mixing(k) is the weight on the new gradient."""

    kind: MomentumKind
    alpha: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"mixing weight must be in (0, 1], got {self.alpha}")

    @classmethod
    def none(cls) -> "MomentumPolicy":
        return cls(MomentumKind.NONE, alpha=1.0)

    @classmethod
    def constant(cls, alpha: float) -> "MomentumPolicy":
        return cls(MomentumKind.CONSTANT, alpha=alpha)

    @classmethod
    def time_varying(cls, alpha: float) -> "MomentumPolicy":
        return cls(MomentumKind.TIME_VARYING, alpha=alpha)

    def mixing(self, k: int) -> float:
        if self.kind is MomentumKind.NONE:
            return 1.0
        if self.kind is MomentumKind.CONSTANT:
            return self.alpha
        return self.alpha / (k + 1) ** ALPHA_DECAY


@dataclass(frozen=True)
class OracleSpec:
    """Which direction oracle each block uses, and how often errors are measured.

    scheme None means the exact oracle for the block's norm; per_block
    entries override the default.  measure_delta_every = n measures the
    oracle error against the exact direction every n-th step (0 = never).
    """

    scheme: PolarScheme | None = None
    per_block: Mapping[str, PolarScheme | None] = field(default_factory=dict)
    measure_delta_every: int = 1

    def resolve(self, block_name: str) -> PolarScheme | None:
        return self.per_block.get(block_name, self.scheme)


@dataclass
class OptimizerState:
    params: list[ParamBlock]
    momentum: dict[str, np.ndarray] | None = None
    step_index: int = 0
    last_measured: dict[str, float] = field(default_factory=dict)

    def values(self) -> dict[str, np.ndarray]:
        return {b.name: b.value for b in self.params}


@dataclass(frozen=True)
class OptimizerConfig:
    variant: str = "deterministic"  # deterministic | stochastic | layerwise
    step: StepPolicy | Mapping[str, StepPolicy] = StepPolicy.constant(0.1)
    momentum: MomentumPolicy = MomentumPolicy.none()
    oracle: OracleSpec = OracleSpec()
    seed: int = 0
    run_id: str = "run"


@dataclass
class BlockTrace:
    """Per-block detail of one step (kept in memory, not in the CSV)."""

    delta: float
    delta_measured: float | None
    gamma: float
    grad_dual: float
    matmuls: int


@dataclass
class TraceRecord:
    run_id: str
    step: int
    loss: float
    grad_dual_norm: float
    momentum_err_dual: float | None
    delta_measured: float | None
    gamma_k: float
    alpha_k: float | None
    oracle_matmuls: int
    status: str
    blocks: dict[str, BlockTrace] = field(default_factory=dict)


@dataclass
class RunResult:
    records: list[TraceRecord]
    status: str  # ok | converged | diverged
    final_params: dict[str, np.ndarray]
    final_loss: float
    run_id: str


def momentum_update(m: np.ndarray, g: np.ndarray, alpha: float) -> np.ndarray:
    """(1 - alpha) * m + alpha * g; alpha = 1 returns g itself (bitwise)."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"mixing weight must be in (0, 1], got {alpha}")
    if alpha == 1.0:
        return g
    return (1.0 - alpha) * m + alpha * g


def _check_delta(delta: float) -> float:
    if not (0.0 <= delta < 1.0):
        raise InvalidInexactness(f"relative oracle error must be in [0, 1), got {delta}")
    return delta


def adaptive_step_size(grad_dual: float, smooth_l: float, delta: float) -> float:
    """Descent-optimal step for an L-smooth objective under oracle error delta."""
    _check_delta(delta)
    if smooth_l <= 0:
        raise ValueError(f"smoothness constant must be positive, got {smooth_l}")
    return grad_dual * (1.0 - delta) / (smooth_l * (1.0 + delta) ** 2)


def glsmooth_step_size(grad_dual: float, l0: float, l1: float, delta: float) -> float:
    """Step rule under generalized (l0, l1)-smoothness and oracle error delta."""
    _check_delta(delta)
    if l0 < 0 or l1 < 0 or (l0 == 0 and l1 == 0):
        raise ValueError(f"need l0, l1 >= 0 with l0 + l1 > 0, got ({l0}, {l1})")
    denom = (l0 + l1 * grad_dual) * (1.0 + delta) ** 2
    if denom == 0.0:
        raise ValueError("step rule undefined: l0 = 0 and gradient norm 0")
    return grad_dual * (1.0 - delta) / denom


def _resolve_policies(step, problem: Problem) -> dict[str, StepPolicy]:
    if isinstance(step, StepPolicy):
        return {b.name: step for b in problem.blocks}
    policies = dict(step)
    missing = [b.name for b in problem.blocks if b.name not in policies]
    if missing:
        raise MissingBlockPolicy(f"no step policy for blocks: {missing}")
    return policies


def _validate_oracle(oracle: OracleSpec, problem: Problem):
    for spec in problem.blocks:
        scheme = oracle.resolve(spec.name)
        if scheme is None:
            continue
        if spec.norm is not NormKind.SPECTRAL:
            raise ConfigError(
                f"block {spec.name!r} has norm {spec.norm.value}; polynomial "
                "polar schemes apply only to spectral-norm blocks"
            )
        if min(spec.shape) == 1:
            raise ConfigError(
                f"block {spec.name!r} has shape {spec.shape}; polynomial polar "
                "schemes are degenerate on single-row/column blocks"
            )
    if oracle.measure_delta_every < 0:
        raise ConfigError("measure_delta_every must be >= 0")


def _block_step_size(policy: StepPolicy, k: int, block_dual: float, delta: float,
                     smooth_l: float | None, gl_pair: tuple[float, float] | None,
                     step_cap: float | None) -> float:
    if policy.kind is StepKind.CONSTANT:
        return policy.gamma
    if policy.kind is StepKind.TIME_VARYING:
        return policy.gamma / (k + 1) ** GAMMA_DECAY
    if policy.kind is StepKind.ADAPTIVE_SMOOTH:
        gamma = adaptive_step_size(block_dual, smooth_l, delta)
    else:
        l0, l1 = gl_pair
        gamma = glsmooth_step_size(block_dual, l0, l1, delta)
    if step_cap is not None:
        # keep local smoothness certificates valid: update norm <= step_cap
        gamma = min(gamma, step_cap / (1.0 + delta))
    return gamma


def _advance(problem: Problem, state: OptimizerState,
             policies: dict[str, StepPolicy], momentum: MomentumPolicy | None,
             oracle: OracleSpec, seed: int, run_id: str):
    """One step of the shared engine.

    Returns (new_state, record) or (state, None) when converged.
    """
    k = state.step_index
    values = state.values()
    loss = problem.value(values)
    grads = problem.gradient(values)
    dual_total = 0.0
    block_duals_true = {}
    for spec in problem.blocks:
        d = dual_norm(grads[spec.name], spec.norm)
        block_duals_true[spec.name] = d
        dual_total += d
    if dual_total < CONVERGENCE_THRESHOLD:
        return state, None

    alpha_k = None
    momentum_err = None
    new_momentum = None
    if momentum is not None:
        alpha_k = momentum.mixing(k)
        observed = problem.stochastic_gradient(values, seed, k)
        if state.momentum is None:
            new_momentum = dict(observed)  # first averaged gradient is the first draw
        else:
            new_momentum = {
                name: momentum_update(state.momentum[name], observed[name], alpha_k)
                for name in observed
            }
        lmo_input = new_momentum
        momentum_err = sum(
            dual_norm(new_momentum[spec.name] - grads[spec.name], spec.norm)
            for spec in problem.blocks
        )
    else:
        lmo_input = grads

    needs_smooth = any(
        policies[b.name].kind is StepKind.ADAPTIVE_SMOOTH
        and policies[b.name].smooth_l is None
        for b in problem.blocks
    )
    local_l = problem.smoothness(values) if needs_smooth else {}

    every = oracle.measure_delta_every
    due = every > 0 and k % every == 0

    new_params = []
    block_traces = {}
    gamma_max = 0.0
    measured_max = None
    matmul_total = 0
    last_measured = dict(state.last_measured)
    for spec in problem.blocks:
        g_b = lmo_input[spec.name]
        block_dual = dual_norm(g_b, spec.norm)
        scheme = oracle.resolve(spec.name)
        if scheme is None:
            result = exact_lmo(g_b, spec.norm)
            if due:
                # the reference is this same computation; the distance is zero
                result.measured_delta = 0.0
        else:
            result = lmo_spectral_approx(g_b, scheme)
            if due:
                measure_delta(g_b, result, spec.norm)
        if due:
            last_measured[spec.name] = result.measured_delta
        held = last_measured.get(spec.name)
        if held is not None:
            delta_used = held
        elif result.declared_delta is not None:
            delta_used = result.declared_delta
        else:
            delta_used = 0.0

        policy = policies[spec.name]
        gamma_b = _block_step_size(
            policy, k, block_dual, delta_used,
            policy.smooth_l if policy.smooth_l is not None else local_l.get(spec.name),
            (policy.l0, policy.l1) if policy.l0 is not None and policy.l1 is not None
            else (problem.gl_certificate() if policy.kind is StepKind.ADAPTIVE_GENERALIZED else None),
            problem.step_cap,
        )

        old = values[spec.name]
        new_params.append(ParamBlock(spec.name, old + gamma_b * result.direction, spec.norm))
        gamma_max = max(gamma_max, gamma_b)
        matmul_total += result.oracle_matmuls
        if held is not None:
            measured_max = held if measured_max is None else max(measured_max, held)
        block_traces[spec.name] = BlockTrace(
            delta=delta_used,
            delta_measured=held,
            gamma=gamma_b,
            grad_dual=block_duals_true[spec.name],
            matmuls=result.oracle_matmuls,
        )

    record = TraceRecord(
        run_id=run_id,
        step=k,
        loss=loss,
        grad_dual_norm=dual_total,
        momentum_err_dual=momentum_err,
        delta_measured=measured_max,
        gamma_k=gamma_max,
        alpha_k=alpha_k,
        oracle_matmuls=matmul_total,
        status="ok",
        blocks=block_traces,
    )
    new_state = OptimizerState(
        params=new_params,
        momentum=new_momentum if new_momentum is not None else state.momentum,
        step_index=k + 1,
        last_measured=last_measured,
    )
    return new_state, record


def step_deterministic(problem: Problem, state: OptimizerState, policy,
                       oracle: OracleSpec, run_id: str = "run"):
    """One deterministic step: oracle on the exact gradient."""
    policies = _resolve_policies(policy, problem)
    _validate_oracle(oracle, problem)
    return _advance(problem, state, policies, None, oracle, seed=0, run_id=run_id)


def step_stochastic(problem: Problem, state: OptimizerState, policy,
                    momentum: MomentumPolicy, oracle: OracleSpec, seed: int,
                    run_id: str = "run"):
    """One stochastic step: oracle on the momentum-averaged noisy gradient."""
    policies = _resolve_policies(policy, problem)
    _validate_oracle(oracle, problem)
    return _advance(problem, state, policies, momentum, oracle, seed, run_id=run_id)


def step_layerwise(problem: Problem, state: OptimizerState,
                   policies: Mapping[str, StepPolicy], oracle: OracleSpec,
                   run_id: str = "run"):
    """One deterministic step with explicit per-block policies."""
    if isinstance(policies, StepPolicy):
        raise MissingBlockPolicy("layer-wise stepping needs a per-block policy mapping")
    resolved = _resolve_policies(policies, problem)
    _validate_oracle(oracle, problem)
    return _advance(problem, state, resolved, None, oracle, seed=0, run_id=run_id)


def initial_state(problem: Problem) -> OptimizerState:
    start = problem.initial_params()
    return OptimizerState(
        params=[ParamBlock(b.name, start[b.name], b.norm) for b in problem.blocks]
    )


def run(problem: Problem, config: OptimizerConfig, steps: int) -> RunResult:
    """Run `steps` optimizer steps; stops early on convergence or divergence.

    Emits one trace record per completed step; a run converged at step j
    yields exactly j records plus the terminal status.
    """
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    if config.variant not in ("deterministic", "stochastic", "layerwise"):
        raise ConfigError(f"unknown variant {config.variant!r}")
    policies = _resolve_policies(config.step, problem)
    _validate_oracle(config.oracle, problem)
    momentum = config.momentum if config.variant == "stochastic" else None

    state = initial_state(problem)
    records: list[TraceRecord] = []
    status = "ok"
    for _ in range(steps):
        try:
            state, record = _advance(problem, state, policies, momentum,
                                      config.oracle, config.seed, config.run_id)
        except DegenerateGradient:
            status = "converged"
            break
        except (SchemeDiverged, NonFiniteValue):
            status = "diverged"
            break
        if record is None:
            status = "converged"
            break
        records.append(record)

    final_values = state.values()
    return RunResult(
        records=records,
        status=status,
        final_params=final_values,
        final_loss=problem.value(final_values),
        run_id=config.run_id,
    )
