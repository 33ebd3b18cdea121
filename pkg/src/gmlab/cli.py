"""Command-line entry point: run configured experiments, list them, print defaults."""

from __future__ import annotations

import argparse
import json
import sys

from gmlab.config import EXPERIMENTS, ConfigError, default_config_document, validate_config
from gmlab.runner import run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a JSON config file")
    run_p.add_argument("config", help="path to the JSON config document")
    run_p.add_argument("--seed", type=int, default=None, help="override master_seed")
    run_p.add_argument("--out-dir", default=None, help="override output_dir")
    run_p.add_argument("--threads", type=int, default=None, help="override worker threads")
    run_p.add_argument("--budget", type=float, default=None, help="override mc_budget_guard")
    run_p.add_argument(
        "--dump-samples", action="store_true", help="write raw sample dumps under <out-dir>/samples/"
    )

    list_p = sub.add_parser("list-experiments", help="print the available experiment names")
    list_p.set_defaults()

    defaults_p = sub.add_parser("print-defaults", help="print a default config document")
    defaults_p.add_argument(
        "--experiment", default="VarianceValidation", choices=EXPERIMENTS, help="experiment to template"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(name)
        return 0

    if args.command == "print-defaults":
        print(json.dumps(default_config_document(args.experiment), indent=2, sort_keys=True))
        return 0

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", file=sys.stderr)
        return 2

    if isinstance(doc, dict):
        if args.seed is not None:
            doc["master_seed"] = args.seed
        if args.out_dir is not None:
            doc["output_dir"] = args.out_dir
        if args.threads is not None:
            doc["threads"] = args.threads
        if args.budget is not None:
            doc["mc_budget_guard"] = args.budget
        if args.dump_samples:
            doc["dump_samples"] = True

    try:
        config = validate_config(json.dumps(doc))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    rows = run(config)
    print(f"wrote {len(rows)} result rows to {config.output_dir}/results.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
