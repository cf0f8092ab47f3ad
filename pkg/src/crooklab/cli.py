"""Command-line entry point: run experiments, list the catalog, evaluate bounds."""

from __future__ import annotations

import argparse
import json
import sys

from . import analysis
from .errors import ConfigError, CrookLabError, DomainError
from .harness import CATALOG, emit_report, load_config, output_path, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_IO = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crooklab", description="Crooked-oracle indifferentiability lab")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment config (YAML or JSON)")
    run.add_argument("config")
    run.add_argument("--output", help="report path (relative paths go under "
                                      "$CROOKLAB_OUTPUT_DIR)")
    run.add_argument("--format", choices=("jsonl", "csv"))
    run.add_argument("--workers", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, help="override master_seed")

    sub.add_parser("list", help="list available experiments")

    bound = sub.add_parser("bound", help="evaluate a closed-form bound")
    bsub = bound.add_subparsers(dest="which", required=True, parser_class=_Parser)
    be = bsub.add_parser("exor")
    be.add_argument("--eps", type=float, required=True)
    be.add_argument("--q1", type=int, required=True)
    be.add_argument("--q2", type=int, required=True)
    be.add_argument("--tau", type=int, required=True)
    be.add_argument("--n", type=int, required=True)
    bs = bsub.add_parser("sponge")
    bs.add_argument("--eps", type=float, required=True)
    bs.add_argument("--q", type=int, required=True)
    bs.add_argument("--tau", type=int, required=True)
    bs.add_argument("--q2", type=int, required=True)
    bs.add_argument("--ell", type=int, required=True)
    bs.add_argument("--s", type=int, required=True)
    bs.add_argument("--r", type=int, required=True)
    bs.add_argument("--c", type=int, required=True)
    bs.add_argument("--kappa", type=int, required=True)
    bs.add_argument("--reading", choices=("blocks", "bits"), default="blocks")
    return p


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as e:
        print(f"crooklab: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    overrides = {k: v for k, v in (("format", args.format), ("workers", args.workers),
                                   ("trials", args.trials), ("master_seed", args.seed))
                 if v is not None}
    if overrides:
        d = cfg.to_dict()
        d.update(overrides)
        d["output"] = cfg.output
        d["workers"] = overrides.get("workers", cfg.workers)
        cfg = type(cfg).from_dict(d)
    report = run_experiment(cfg)
    path = output_path(cfg, args.output)
    try:
        emit_report(report, path, cfg.format)
    except OSError as e:
        print(f"crooklab: cannot write report: {e}", file=sys.stderr)
        return EXIT_IO
    status = "PASS" if report.passed else "FAIL"
    print(f"{cfg.experiment}: {status} ({len(report.rows)} rows) -> {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


def _cmd_list(args) -> int:
    width = max(len(k) for k in CATALOG)
    for name, exp in CATALOG.items():
        print(f"{name:<{width}}  {exp.description}")
    return EXIT_OK


def _cmd_bound(args) -> int:
    if args.which == "exor":
        b = analysis.exor_bound(eps=args.eps, q1=args.q1, q2=args.q2, tau=args.tau, n=args.n)
    else:
        ls = analysis.sponge_ell_s(args.ell, args.s, args.r)[args.reading]
        b = analysis.sponge_bound(q=args.q, tau=args.tau, q2=args.q2, ell_s=ls,
                                  kappa=args.kappa, r=args.r, c=args.c, eps=args.eps)
    print(json.dumps({"construction": args.which, **b.as_dict()}))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    handler = {"run": _cmd_run, "list": _cmd_list, "bound": _cmd_bound}[args.command]
    try:
        return handler(args)
    except (ConfigError, DomainError) as e:
        print(f"crooklab: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CrookLabError as e:
        print(f"crooklab: experiment failed: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
