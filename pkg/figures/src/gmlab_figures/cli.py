"""Command line: render one figure spec against a results directory."""

from __future__ import annotations

import argparse
import sys

from gmlab_figures.render import SchemaError, load_spec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gmlab-figures", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    render_p = sub.add_parser("render", help="render a figure from a spec JSON")
    render_p.add_argument("--spec", required=True, help="figure spec JSON file")
    render_p.add_argument("--in", dest="in_dir", required=True, help="directory holding the input CSVs")
    render_p.add_argument("--out", dest="out_dir", required=True, help="directory for the rendered image")
    args = parser.parse_args(argv)

    try:
        spec = load_spec(args.spec)
    except (OSError, ValueError) as exc:
        print(f"error: bad figure spec: {exc}", file=sys.stderr)
        return 2
    try:
        out = render(spec, args.in_dir, args.out_dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"error: schema mismatch: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
