"""Config-driven experiment runner.

Subcommands: ``run`` executes an experiment and writes the CSV trace plus a
JSON summary (and, with ``--figures``, rendered convergence figures);
``validate`` prints the hypothesis-by-hypothesis report without running;
``list-fixtures`` shows the bundled example configs; ``report`` renders
figures for an existing trace.

Exit codes: 0 converged, 1 usage/parse error, 2 validator refusal in strict
mode (no trace written), 3 divergence or failure to converge.
"""

import argparse
import json
import os
import sys
from importlib import resources

from .config import ConfigError, ExperimentConfig
from .schedules import ScheduleValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for validator refusals
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fixture_dir():
    return resources.files("vmfb") / "fixtures"


def list_fixtures():
    names = sorted(p.name for p in _fixture_dir().iterdir()
                   if p.name.endswith(".cfg"))
    return names


def resolve_config(spec):
    """A path on disk, or the name of a bundled fixture."""
    if os.path.exists(spec):
        return spec
    candidate = _fixture_dir() / spec
    if candidate.is_file():
        return str(candidate)
    raise ConfigError("config", f"no such config file or bundled fixture: {spec}")


def _load(args):
    cfg = ExperimentConfig.from_path(resolve_config(args.config))
    if getattr(args, "seed", None) is not None:
        cfg.data["seed"] = args.seed
    return cfg


def cmd_run(args):
    cfg = _load(args)
    policy = ("strict" if args.strict else "warn" if args.warn else None)
    experiment = cfg.build(policy_override=policy,
                           max_iter_override=args.max_iter_override)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, cfg.outputs["trace"])
    summary_path = os.path.join(out_dir, cfg.outputs["summary"])

    summary = {
        "solver": cfg.solver,
        "seed": cfg.data["seed"],
        "config": args.config,
    }
    try:
        result = experiment.run()
    except ScheduleValidationError as exc:
        print(exc.report.text(), file=sys.stderr)
        summary["exit_code"] = EXIT_VALIDATION
        summary["validation"] = exc.report.text().splitlines()
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2)
        print(f"validation refused the run (strict mode); summary: {summary_path}")
        return EXIT_VALIDATION

    trace = result.trace
    trace.to_csv(trace_path, timing=args.timing)
    code = EXIT_OK if result.converged else EXIT_DIVERGED
    summary.update({
        "converged": result.converged,
        "reason": result.reason,
        "iterations": trace.iterations,
        "final_residual": trace.final_residual,
        "wall_time_s": result.elapsed_s,
        "exit_code": code,
    })
    report = trace.metadata.get("validation")
    if report is not None:
        summary["validation"] = report.text().splitlines()
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"{result.reason} after {trace.iterations} iterations; "
          f"final residual {trace.final_residual:.3e}")
    print(f"trace: {trace_path}\nsummary: {summary_path}")
    if args.figures:
        from .report import render_trace_figures
        for p in render_trace_figures(trace_path, out_dir=out_dir):
            print(f"figure: {p}")
    return code


def cmd_validate(args):
    cfg = _load(args)
    experiment = cfg.build()
    report = experiment.validate()
    print(report.text())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_list_fixtures(_args):
    for name in list_fixtures():
        print(f"{name}\t{_fixture_dir() / name}")
    return EXIT_OK


def cmd_report(args):
    from .report import render_trace_figures
    paths = render_trace_figures(args.trace, out_dir=args.out_dir,
                                 fmt=args.format)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="vmfb",
                     description="variable-metric splitting experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config")
    run.add_argument("--config", required=True,
                     help="config path or bundled fixture name")
    run.add_argument("--out-dir", default=None, help="output directory")
    g = run.add_mutually_exclusive_group()
    g.add_argument("--strict", action="store_true",
                   help="refuse to run when hypothesis validation fails")
    g.add_argument("--warn", action="store_true",
                   help="proceed with a warning when validation fails")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--max-iter-override", type=int, default=None)
    run.add_argument("--timing", action="store_true",
                     help="write measured wall-clock nanoseconds into the trace "
                          "(off by default so reruns are bit-identical)")
    run.add_argument("--figures", action="store_true",
                     help="render convergence figures next to the trace")
    run.set_defaults(fn=cmd_run)

    val = sub.add_parser("validate", help="print the hypothesis report")
    val.add_argument("--config", required=True)
    val.add_argument("--seed", type=int, default=None)
    val.set_defaults(fn=cmd_validate)

    lf = sub.add_parser("list-fixtures", help="list bundled example configs")
    lf.set_defaults(fn=cmd_list_fixtures)

    rep = sub.add_parser("report", help="render figures for a trace CSV")
    rep.add_argument("--trace", required=True)
    rep.add_argument("--out-dir", default=None)
    rep.add_argument("--format", default="png", choices=("png", "pdf", "svg"))
    rep.set_defaults(fn=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
