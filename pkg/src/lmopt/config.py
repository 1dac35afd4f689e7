"""Plain-text run/sweep configuration: INI sections with key = value pairs.

A config has sections [problem], [optimizer], [oracle], [run] and optionally
[sweep].  parse_config/dump_config round-trip exactly: parsing the dump of a
parsed config yields an identical object.  All numbers are decimal; float
values are emitted with repr() so they survive the round trip bit-exactly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .core import NormKind
from .errors import ConfigError
from .optimizer import MomentumPolicy, OptimizerConfig, OracleSpec, StepPolicy
from .polar import Normalization, PolarScheme, load_coefficient_table
from .problems import (
    Problem,
    make_logistic,
    make_matrix_factorization,
    make_matrix_quadratic,
    make_quartic,
)

__all__ = [
    "ProblemConfig",
    "OptimizerSection",
    "OracleSection",
    "RunSection",
    "SweepSection",
    "RunConfig",
    "parse_config",
    "load_config",
    "dump_config",
    "build_problem",
    "build_oracle",
    "build_optimizer_config",
    "MAX_SWEEP_CELLS",
]

MAX_SWEEP_CELLS = 10_000

_NORM_NAMES = {k.value: k for k in NormKind}
_NORMALIZATIONS = {n.value: n for n in Normalization}


@dataclass(frozen=True)
class ProblemConfig:
    name: str = "quadratic"
    seed: int = 0
    sigma: float = 0.0
    rows: int = 8
    cols: int = 6
    dim: int = 50
    samples: int = 128
    margin: float = 0.1
    flip: float = 0.0
    block_rows: int = 0   # 0 = default vector block
    block_cols: int = 0
    norm: str = "linf"
    noise: str = "minibatch"
    size: int = 8
    rank: int = 3
    x0_norm: float = 10.0


@dataclass(frozen=True)
class OptimizerSection:
    variant: str = "deterministic"
    step: str = "constant"
    gamma: float = 0.1
    momentum: str = "none"
    alpha: float = 1.0
    smooth_l: float = 0.0  # 0 = use the problem certificate
    l0: float = 0.0
    l1: float = 0.0


@dataclass(frozen=True)
class OracleSection:
    kind: str = "exact"
    iterations: int = 5
    normalization: str = "frobenius"
    table: str = ""
    measure_every: int = 1


@dataclass(frozen=True)
class RunSection:
    steps: int = 100
    seeds: tuple[int, ...] = (0,)
    output: str = "trace.csv"


@dataclass(frozen=True)
class SweepSection:
    gammas: tuple[float, ...] = (0.1,)
    alphas: tuple[float, ...] = (1.0,)
    oracle_iterations: tuple[int, ...] = (0,)  # 0 = exact oracle
    seeds: tuple[int, ...] = (0,)
    output: str = "sweep.csv"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    run: RunSection = field(default_factory=RunSection)
    sweep: SweepSection | None = None


def _get(parser, section, key, cast, default, path="config"):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        if cast is bool:
            return raw.lower() in ("1", "true", "yes")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: [{section}] {key} = {raw!r}: {exc}") from exc


def _int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.split())


def _float_tuple(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split())


def parse_config(text: str, path: str = "config") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in ("problem", "optimizer", "oracle", "run"):
        if not parser.has_section(section):
            raise ConfigError(f"{path}: missing [{section}] section")
    known = {"problem", "optimizer", "oracle", "run", "sweep"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"{path}: unknown sections {sorted(extra)}")

    problem = ProblemConfig(
        name=_get(parser, "problem", "name", str, "quadratic", path),
        seed=_get(parser, "problem", "seed", int, 0, path),
        sigma=_get(parser, "problem", "sigma", float, 0.0, path),
        rows=_get(parser, "problem", "rows", int, 8, path),
        cols=_get(parser, "problem", "cols", int, 6, path),
        dim=_get(parser, "problem", "dim", int, 50, path),
        samples=_get(parser, "problem", "samples", int, 128, path),
        margin=_get(parser, "problem", "margin", float, 0.1, path),
        flip=_get(parser, "problem", "flip", float, 0.0, path),
        block_rows=_get(parser, "problem", "block_rows", int, 0, path),
        block_cols=_get(parser, "problem", "block_cols", int, 0, path),
        norm=_get(parser, "problem", "norm", str, "linf", path),
        noise=_get(parser, "problem", "noise", str, "minibatch", path),
        size=_get(parser, "problem", "size", int, 8, path),
        rank=_get(parser, "problem", "rank", int, 3, path),
        x0_norm=_get(parser, "problem", "x0_norm", float, 10.0, path),
    )
    optimizer = OptimizerSection(
        variant=_get(parser, "optimizer", "variant", str, "deterministic", path),
        step=_get(parser, "optimizer", "step", str, "constant", path),
        gamma=_get(parser, "optimizer", "gamma", float, 0.1, path),
        momentum=_get(parser, "optimizer", "momentum", str, "none", path),
        alpha=_get(parser, "optimizer", "alpha", float, 1.0, path),
        smooth_l=_get(parser, "optimizer", "smooth_l", float, 0.0, path),
        l0=_get(parser, "optimizer", "l0", float, 0.0, path),
        l1=_get(parser, "optimizer", "l1", float, 0.0, path),
    )
    oracle = OracleSection(
        kind=_get(parser, "oracle", "kind", str, "exact", path),
        iterations=_get(parser, "oracle", "iterations", int, 5, path),
        normalization=_get(parser, "oracle", "normalization", str, "frobenius", path),
        table=_get(parser, "oracle", "table", str, "", path),
        measure_every=_get(parser, "oracle", "measure_every", int, 1, path),
    )
    run = RunSection(
        steps=_get(parser, "run", "steps", int, 100, path),
        seeds=_get(parser, "run", "seeds", _int_tuple, (0,), path),
        output=_get(parser, "run", "output", str, "trace.csv", path),
    )
    sweep = None
    if parser.has_section("sweep"):
        sweep = SweepSection(
            gammas=_get(parser, "sweep", "gammas", _float_tuple, (0.1,), path),
            alphas=_get(parser, "sweep", "alphas", _float_tuple, (1.0,), path),
            oracle_iterations=_get(parser, "sweep", "oracle_iterations", _int_tuple, (0,), path),
            seeds=_get(parser, "sweep", "seeds", _int_tuple, (0,), path),
            output=_get(parser, "sweep", "output", str, "sweep.csv", path),
        )
        cells = len(sweep.gammas) * len(sweep.alphas) * len(sweep.oracle_iterations)
        if cells == 0:
            raise ConfigError(f"{path}: [sweep] has an empty axis")
        if cells > MAX_SWEEP_CELLS:
            raise ConfigError(f"{path}: sweep has {cells} cells, cap is {MAX_SWEEP_CELLS}")
    cfg = RunConfig(problem=problem, optimizer=optimizer, oracle=oracle, run=run, sweep=sweep)
    _validate(cfg, path)
    return cfg


def _validate(cfg: RunConfig, path: str):
    if cfg.problem.name not in ("quadratic", "logistic", "factorization", "quartic"):
        raise ConfigError(f"{path}: unknown problem {cfg.problem.name!r}")
    if cfg.optimizer.variant not in ("deterministic", "stochastic", "layerwise"):
        raise ConfigError(f"{path}: unknown variant {cfg.optimizer.variant!r}")
    if cfg.optimizer.step not in ("constant", "adaptive", "adaptive-gl", "time-varying"):
        raise ConfigError(f"{path}: unknown step policy {cfg.optimizer.step!r}")
    if cfg.optimizer.momentum not in ("none", "constant", "time-varying"):
        raise ConfigError(f"{path}: unknown momentum policy {cfg.optimizer.momentum!r}")
    if cfg.oracle.kind not in ("exact", "newton-schulz", "svd-reference", "table"):
        raise ConfigError(f"{path}: unknown oracle kind {cfg.oracle.kind!r}")
    if cfg.oracle.kind == "table" and not cfg.oracle.table:
        raise ConfigError(f"{path}: oracle kind 'table' needs a table path")
    if cfg.oracle.normalization not in _NORMALIZATIONS:
        raise ConfigError(f"{path}: unknown normalization {cfg.oracle.normalization!r}")
    if cfg.problem.norm not in _NORM_NAMES:
        raise ConfigError(f"{path}: unknown norm {cfg.problem.norm!r}")
    if cfg.problem.sigma < 0:
        raise ConfigError(f"{path}: sigma must be >= 0")
    if cfg.run.steps < 0:
        raise ConfigError(f"{path}: steps must be >= 0")
    if not cfg.run.seeds:
        raise ConfigError(f"{path}: need at least one seed")
    if not (0.0 < cfg.optimizer.alpha <= 1.0):
        raise ConfigError(f"{path}: alpha must be in (0, 1]")
    if cfg.optimizer.gamma <= 0 and cfg.optimizer.step in ("constant", "time-varying"):
        raise ConfigError(f"{path}: gamma must be positive for {cfg.optimizer.step} steps")


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path=str(path))


def _fmt_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_fmt_value(v) for v in value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser["problem"] = {k: _fmt_value(v) for k, v in vars(cfg.problem).items()}
    parser["optimizer"] = {k: _fmt_value(v) for k, v in vars(cfg.optimizer).items()}
    parser["oracle"] = {k: _fmt_value(v) for k, v in vars(cfg.oracle).items()}
    parser["run"] = {k: _fmt_value(v) for k, v in vars(cfg.run).items()}
    if cfg.sweep is not None:
        parser["sweep"] = {k: _fmt_value(v) for k, v in vars(cfg.sweep).items()}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def build_problem(pc: ProblemConfig) -> Problem:
    if pc.name == "quadratic":
        return make_matrix_quadratic(pc.rows, pc.cols, seed=pc.seed, sigma=pc.sigma)
    if pc.name == "logistic":
        block_shape = None
        if pc.block_rows and pc.block_cols:
            block_shape = (pc.block_rows, pc.block_cols)
        return make_logistic(
            pc.dim, pc.samples, seed=pc.seed, margin=pc.margin,
            block_shape=block_shape, norm=_NORM_NAMES[pc.norm],
            noise=pc.noise, sigma=pc.sigma, flip=pc.flip,
        )
    if pc.name == "factorization":
        return make_matrix_factorization(pc.size, pc.rank, seed=pc.seed, sigma=pc.sigma)
    if pc.name == "quartic":
        return make_quartic(pc.dim, seed=pc.seed, x0_norm=pc.x0_norm, sigma=pc.sigma)
    raise ConfigError(f"unknown problem {pc.name!r}")


def build_oracle(oc: OracleSection, iterations: int | None = None) -> OracleSpec:
    """OracleSpec from the [oracle] section; `iterations` overrides (0 = exact)."""
    kind = oc.kind
    iters = oc.iterations if iterations is None else iterations
    if iterations is not None and iterations == 0:
        kind = "exact"
    if kind == "exact":
        scheme = None
    elif kind == "newton-schulz":
        scheme = PolarScheme.newton_schulz(iters, _NORMALIZATIONS[oc.normalization])
    elif kind == "svd-reference":
        scheme = PolarScheme.svd_reference()
    else:
        scheme = load_coefficient_table(
            oc.table, iterations=iters if iterations is not None else None,
            normalization=_NORMALIZATIONS[oc.normalization],
        )
    return OracleSpec(scheme=scheme, measure_delta_every=oc.measure_every)


def _build_step(opt: OptimizerSection) -> StepPolicy:
    if opt.step == "constant":
        return StepPolicy.constant(opt.gamma)
    if opt.step == "adaptive":
        return StepPolicy.adaptive_smooth(opt.smooth_l if opt.smooth_l > 0 else None)
    if opt.step == "adaptive-gl":
        if opt.l0 > 0 or opt.l1 > 0:
            return StepPolicy.adaptive_generalized(opt.l0, opt.l1)
        return StepPolicy.adaptive_generalized()
    return StepPolicy.time_varying(opt.gamma)


def _build_momentum(opt: OptimizerSection) -> MomentumPolicy:
    if opt.momentum == "none":
        return MomentumPolicy.none()
    if opt.momentum == "constant":
        return MomentumPolicy.constant(opt.alpha)
    return MomentumPolicy.time_varying(opt.alpha)


def build_optimizer_config(cfg: RunConfig, seed: int, run_id: str,
                           oracle_iterations: int | None = None) -> OptimizerConfig:
    return OptimizerConfig(
        variant=cfg.optimizer.variant,
        step=_build_step(cfg.optimizer),
        momentum=_build_momentum(cfg.optimizer),
        oracle=build_oracle(cfg.oracle, iterations=oracle_iterations),
        seed=seed,
        run_id=run_id,
    )
