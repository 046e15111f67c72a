"""Command line interface: ``homindex run | acceptance | converge``.

Exit codes: 0 success, 1 computation error or failed verdict, 2 invalid
configuration or arguments.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError
from .config import load_config, parse_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

ACCEPTANCE_SCHEMA = {
    "type": "object",
    "properties": {"criteria": {"type": "array", "items": {"type": "string"}}},
    "required": ["criteria"],
    "additionalProperties": False,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homindex", description="Numerical checks of a resolvent trace formula.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir in the config)")
        p.add_argument("--workers", type=int, default=1, help="concurrent sweep points (default 1)")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")

    common(sub.add_parser("run", help="run one experiment and write results.csv, manifest.json, summary.txt"))
    common(sub.add_parser("converge", help="refinement ladders with observed orders"))
    acc = sub.add_parser("acceptance", help="run the acceptance criteria A1-A11")
    acc.add_argument("criteria", nargs="*", help="criterion ids (default: all)")
    acc.add_argument("--config", action="append", default=[], help="JSON file with {\"criteria\": [...]}; repeatable")
    acc.add_argument("--verbose", action="store_true", help="print every sub-check")
    return parser


def _load_criteria(paths):
    import jsonschema

    selected = []
    for path in paths:
        try:
            data = parse_json(Path(path).read_text(), path)
        except OSError as exc:
            raise ConfigurationError(f"cannot read {path}: {exc}") from exc
        try:
            jsonschema.validate(data, ACCEPTANCE_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigurationError(f"{path}: {exc.message}") from exc
        selected.extend(data["criteria"])
    return selected


def _cmd_acceptance(args) -> int:
    from .acceptance import CRITERIA, run_suite

    selected = list(args.criteria) + _load_criteria(args.config)
    explicit = bool(args.criteria or args.config)
    if explicit and not selected:
        print("error: the criterion list is empty", file=sys.stderr)
        return EXIT_CONFIG
    unknown = [c for c in selected if c not in CRITERIA]
    if unknown:
        print(f"error: unknown criteria {unknown}; choose from {list(CRITERIA)}", file=sys.stderr)
        return EXIT_CONFIG
    suite = run_suite(selected if explicit else None, verbose=args.verbose)
    return EXIT_OK if suite.passed else EXIT_FAIL


def _cmd_run(args, require_converge: bool) -> int:
    from .runner import run

    cfg = load_config(args.config)
    if require_converge and cfg.experiment != "converge":
        raise ConfigurationError(f"{args.config}: field $.experiment: converge needs experiment 'converge', got {cfg.experiment!r}")
    if args.workers < 1:
        raise ConfigurationError("--workers must be at least 1")
    out = args.out or cfg.output_dir
    result = run(cfg, out, workers=args.workers)
    for line in result.summary:
        print(line)
    print(f"artifacts written to {out}")
    return EXIT_OK if result.passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "acceptance":
            return _cmd_acceptance(args)
        return _cmd_run(args, require_converge=args.command == "converge")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # compute errors propagate as exit 1
        if getattr(args, "verbose", False):
            logging.exception("computation failed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
