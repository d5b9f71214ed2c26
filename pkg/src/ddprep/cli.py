"""Command-line experiment runner.

Subcommands:
  run <config-path> [--out DIR] [--seed N] [--workers N] [--resume]
                    [--no-figure]
  list
  coefficients <sequence-tag | times-file> [--t-p T]

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, load_config, validate
from .experiments import ExperimentFailure, list_experiments, run_experiment
from .magnus import coefficients
from .pulses import custom_unit, sequence_from_tag
from .results import ResultTable


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        doc = json.loads(config.to_json())
        doc["run"]["seed"] = args.seed
        config = validate(doc)
    try:
        outputs = run_experiment(
            config,
            args.out,
            workers=args.workers,
            resume=args.resume,
            make_figure=not args.no_figure,
        )
    except ExperimentFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface as runtime failure
        print(f"error: {exc!r}", file=sys.stderr)
        return 2
    for kind, path in outputs.items():
        print(f"{kind}: {path}")
    return 0


def _cmd_list(_args) -> int:
    for experiment_id, description, anchor in list_experiments():
        print(f"{experiment_id:22s} {description} [{anchor}]")
    return 0


def _sequence_from_cli(spec: str, t_p: float):
    if os.path.exists(spec):
        with open(spec) as fh:
            text = fh.read()
        try:
            times = json.loads(text)
        except json.JSONDecodeError:
            times = [float(tok) for tok in text.split()]
        label = os.path.splitext(os.path.basename(spec))[0]
        return custom_unit(times, t_p, label)
    return sequence_from_tag(spec, t_p)


def _cmd_coefficients(args) -> int:
    try:
        seq = _sequence_from_cli(args.sequence, args.t_p)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    c = coefficients(seq)
    table = ResultTable(
        ["sequence", "N", "alpha1", "alpha2", "alpha3a", "alpha3b", "alpha3b_N2"]
    )
    table.append(
        {
            "sequence": seq.label,
            "N": seq.n_pulses,
            "alpha1": c.alpha1,
            "alpha2": c.alpha2,
            "alpha3a": c.alpha3a,
            "alpha3b": c.alpha3b,
            "alpha3b_N2": c.alpha3b * seq.n_pulses**2,
        }
    )
    sys.stdout.write(table.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddprep",
        description="pulse-protected dissipative state preparation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    p_run.add_argument("--workers", type=int, default=None, help="worker processes")
    p_run.add_argument(
        "--resume", action="store_true", help="reuse completed grid points"
    )
    p_run.add_argument(
        "--no-figure", action="store_true", help="skip figure rendering"
    )
    p_run.set_defaults(func=_cmd_run)

    p_list = sub.add_parser("list", help="list registered experiments")
    p_list.set_defaults(func=_cmd_list)

    p_coeff = sub.add_parser(
        "coefficients", help="print the unit coefficients of a pulse sequence"
    )
    p_coeff.add_argument("sequence", help="sequence tag or file of normalized times")
    p_coeff.add_argument("--t-p", type=float, default=1.0, help="unit duration")
    p_coeff.set_defaults(func=_cmd_coefficients)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
