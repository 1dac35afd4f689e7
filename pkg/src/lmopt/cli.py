"""Command-line interface.

Subcommands:
    run            optimize per a config file, write a trace CSV
    sweep          grid of (gamma, alpha, oracle quality) x seeds, write CSVs
    coupling       analyze a sweep CSV: does a coarser oracle prefer smaller steps?
    measure-delta  measured vs predicted oracle inexactness on synthetic spectra
    verify         re-check theoretical guarantees against a recorded trace

Exit codes:
    0  success
    1  a verification check failed (including a failed coupling analysis)
    2  configuration problem (bad config/table file, insufficient grid)
    3  numerical failure (divergence, non-finite values)
    4  a required smoothness certificate is missing
"""

from __future__ import annotations

import argparse
import sys

from .errors import (
    ConfigError,
    InsufficientGrid,
    LmoptError,
    MissingCertificate,
    NonFiniteValue,
    ParseError,
    SchemeDiverged,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NO_CERTIFICATE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmopt",
        description="Norm-constrained steepest-descent optimizer with inexact direction oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the optimizer per a config file")
    p_run.add_argument("config", help="path to an INI config file")
    p_run.add_argument("--output", default=None, help="trace CSV path (overrides [run] output)")
    p_run.add_argument("--steps", type=int, default=None, help="override [run] steps")

    p_sweep = sub.add_parser("sweep", help="run a (gamma, alpha, oracle) x seeds grid")
    p_sweep.add_argument("config", help="path to an INI config file with a [sweep] section")
    p_sweep.add_argument("--output", default=None, help="sweep CSV path (overrides [sweep] output)")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="thread count (default: LMOPT_WORKERS or cpu count)")

    p_cpl = sub.add_parser("coupling", help="analyze oracle-quality/step-size coupling")
    p_cpl.add_argument("sweep_csv", help="per-seed sweep CSV produced by the sweep command")

    p_md = sub.add_parser("measure-delta", help="profile oracle inexactness vs iteration count")
    p_md.add_argument("--rows", type=int, default=32)
    p_md.add_argument("--cols", type=int, default=32)
    p_md.add_argument("--iterations", type=int, nargs="+", default=[1, 3, 5, 8])
    p_md.add_argument("--trials", type=int, default=50)
    p_md.add_argument("--seed", type=int, default=0)
    p_md.add_argument("--sigma-min", type=float, default=0.1)
    p_md.add_argument("--sigma-max", type=float, default=1.0)
    p_md.add_argument("--normalization", choices=["frobenius", "spectral"], default="spectral")

    p_ver = sub.add_parser("verify", help="check recorded runs against the theory")
    p_ver.add_argument("config", help="config file the trace was produced with")
    p_ver.add_argument("trace_csv", help="trace CSV to verify")
    p_ver.add_argument("--smooth-l", type=float, default=None,
                       help="override the certified smoothness constant")
    return parser


def _cmd_run(args) -> int:
    from . import config as cfgmod
    from . import harness

    cfg = cfgmod.load_config(args.config)
    if args.steps is not None:
        cfg = cfgmod.RunConfig(
            problem=cfg.problem, optimizer=cfg.optimizer, oracle=cfg.oracle,
            run=cfgmod.RunSection(steps=args.steps, seeds=cfg.run.seeds, output=cfg.run.output),
            sweep=cfg.sweep,
        )
    results = harness.execute_run(cfg)
    records = [rec for _, result in results for rec in result.records]
    out_path = args.output or cfg.run.output
    harness.write_trace_csv(out_path, records)
    failed = False
    for seed, result in results:
        print(f"{result.run_id}: status={result.status} steps={len(result.records)} "
              f"final_loss={result.final_loss!r}")
        if result.status == "diverged":
            failed = True
    print(f"wrote {out_path}")
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_sweep(args) -> int:
    from . import config as cfgmod
    from . import harness

    cfg = cfgmod.load_config(args.config)
    if cfg.sweep is None:
        raise ConfigError(f"{args.config}: sweep command needs a [sweep] section")
    rows = harness.execute_sweep(cfg, workers=args.workers)
    out_path = args.output or cfg.sweep.output
    harness.write_sweep_csv(out_path, rows)
    n_cells = len({r.cell_id for r in rows})
    n_div = sum(1 for r in rows if r.status == "diverged")
    print(f"wrote {out_path} and {harness.agg_path_for(out_path)} "
          f"({len(rows)} rows, {n_cells} cells, {n_div} diverged)")
    return EXIT_OK


def _cmd_coupling(args) -> int:
    from . import harness

    rows = harness.read_sweep_csv(args.sweep_csv)
    report = harness.coupling_report(rows)
    for lv in report.levels:
        flat = " (flat)" if lv.flat else ""
        print(f"oracle_iters={lv.oracle_iters}: mean_delta={lv.mean_delta:.6g} "
              f"best_gamma={lv.best_gamma!r} best_alpha={lv.best_alpha!r} "
              f"best_loss={lv.best_loss!r}{flat}")
    flags = []
    if report.uninformative:
        flags.append("uninformative")
    if not report.alpha_nondecreasing:
        flags.append("alpha-direction-advisory")
    suffix = f" [{', '.join(flags)}]" if flags else ""
    if report.passed:
        print(f"PASS coupling: best gamma is nonincreasing as oracle error grows{suffix}")
        return EXIT_OK
    print(f"FAIL coupling: {report.detail}{suffix}")
    return EXIT_VERIFY_FAILED


def _cmd_measure_delta(args) -> int:
    from . import harness
    from .polar import Normalization

    norm = Normalization.SPECTRAL if args.normalization == "spectral" else Normalization.FROBENIUS
    samples = harness.measure_delta_profile(
        rows=args.rows, cols=args.cols, iteration_counts=tuple(args.iterations),
        trials=args.trials, seed=args.seed,
        sigma_range=(args.sigma_min, args.sigma_max), normalization=norm,
    )
    print("iterations,mean_delta,max_delta,apriori_bound")
    for s in samples:
        bound = "" if s.bound is None else repr(s.bound)
        print(f"{s.iterations},{s.mean_measured!r},{s.max_measured!r},{bound}")
    means = [s.mean_measured for s in samples]
    if all(b < a for a, b in zip(means, means[1:])):
        print("PASS measure-delta: mean inexactness decreases with iteration count")
    else:
        print("WARN measure-delta: mean inexactness is not monotone in iteration count")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from . import config as cfgmod
    from . import harness

    cfg = cfgmod.load_config(args.config)
    reports = harness.verify_trace(cfg, args.trace_csv, smooth_l=args.smooth_l)
    failed = False
    for rep in reports:
        tag = "ADVISORY" if rep.advisory else ("PASS" if rep.satisfied else "FAIL")
        print(f"{tag} {rep.name}: empirical={rep.empirical!r} bound={rep.theoretical!r} "
              f"margin={rep.margin!r}{(' — ' + rep.detail) if rep.detail else ''}")
        if not rep.advisory and not rep.satisfied:
            failed = True
    if not reports:
        print("no applicable checks for this config")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "coupling": _cmd_coupling,
        "measure-delta": _cmd_measure_delta,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except MissingCertificate as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CERTIFICATE
    except (ConfigError, ParseError, InsufficientGrid, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemeDiverged, NonFiniteValue) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LmoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
