"""Command line entry point: ``perturblab <stage> [options]``.

Exit codes: 0 when nothing failed, 1 when a certificate failed, 2 for a
configuration or I/O error, 3 when a numerical abort stopped a stage.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import __version__, config, plots, report, runner
from .numkernel import NumericalAbort

COMMANDS = runner.STAGES + ("all",)
EXIT_CONFIG = 2
EXIT_ABORT = 3


def _demo_dir():
    return resources.files("perturblab").joinpath("demos")


def demo_names() -> list[str]:
    return sorted(p.name[:-5] for p in _demo_dir().iterdir()
                  if p.name.endswith(".toml"))


def resolve_config(arg: str | None) -> config.ExperimentConfig:
    """A path, or the name of a shipped demo; defaults when absent."""
    if arg is None:
        return config.ExperimentConfig()
    if not Path(arg).exists() and arg in demo_names():
        text = _demo_dir().joinpath(f"{arg}.toml").read_text(encoding="utf-8")
        return config.parse(text)
    return config.load(arg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="config file, or a demo name: " + ", ".join(demo_names()))
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for randomized checks")
    common.add_argument("--threads", type=int, metavar="N", help="stages run concurrently")
    common.add_argument("--format", choices=report.FORMATS, default="both")
    common.add_argument("--no-figures", dest="figures", action="store_false",
                        help="skip the PNG figures")
    common.add_argument("--quiet", action="store_true", help="print only the summary line")
    p = argparse.ArgumentParser(prog="perturblab",
                                description="Numerical certificates for perturbed semigroups.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {"ultra": "smoothing exponent fit and its stability under perturbation",
             "dyson": "Dyson-Phillips series, variation of parameters, growth bound",
             "spectrum": "eigenvalue tracking and analyticity of the projection",
             "positivity": "eventual positivity certificates",
             "gap": "graph gap and Neumann series suite",
             "all": "every stage"}
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    sub.add_parser("demos", help="list the shipped demo configs")
    return p


def _summary_lines(record: runner.RunRecord) -> list[str]:
    lines = []
    for sname, stage in record.stages.items():
        lines.append(f"{sname}: {stage.outcome} ({stage.seconds:.1f} s)")
        if stage.error:
            lines.append(f"  error: {stage.error}")
        for cname, cert in stage.certificates.items():
            lines.append(f"  {cname}: {cert['verdict']}")
    return lines


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "demos":
        print("\n".join(demo_names()))
        return 0
    try:
        cfg = resolve_config(args.config)
        changes = {k: v for k, v in (("seed", args.seed), ("threads", args.threads),
                                     ("output_dir", args.out)) if v is not None}
        cfg = cfg.replace(**changes)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stages = runner.STAGES if args.command == "all" else (args.command,)
    try:
        record = runner.run(cfg, stages)
    except NumericalAbort as exc:
        print(f"numerical abort while building operators: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    writer = report.Writer(cfg.output_dir, record.config_hash)
    try:
        paths = report.emit(record, writer, args.format)
        if args.figures:
            for stage in record.stages.values():
                for stem, fig in plots.stage_figures(stage):
                    paths.append(writer.write_figure(stem, fig))
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print("\n".join(_summary_lines(record)))
        for p in paths:
            print(f"wrote {p}")
    print(f"{cfg.name} [{record.config_hash}]: exit {record.exit_code}")
    return record.exit_code


if __name__ == "__main__":
    sys.exit(main())
