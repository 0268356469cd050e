"""Command line entry point: ``run``, ``resume`` and ``verify``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 blow-up,
4 area abort, 5 verification failure.  The output directory is taken from
``--output-dir``, then ``$STOKESPATCH_OUTPUT_DIR``, then the config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .sim import OUTPUT_DIR_ENV, parse_config, resume_simulation, run_simulation
from .verify import BUNDLES, run_bundle

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_AREA = 4
EXIT_VERIFY = 5

_STATUS_CODES = {"completed": EXIT_OK, "blow-up": EXIT_BLOWUP, "area-abort": EXIT_AREA}


def _load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _finish(summary) -> int:
    print(json.dumps(summary.to_json()))
    if summary.message:
        print(summary.message, file=sys.stderr)
    return _STATUS_CODES[summary.status]


def _cmd_run(args) -> int:
    return _finish(run_simulation(_load_config(args.config), output_dir=args.output_dir))


def _cmd_resume(args) -> int:
    cfg = _load_config(args.config)
    return _finish(resume_simulation(args.snapshot, cfg, output_dir=args.output_dir))


def _cmd_verify(args) -> int:
    names = list(BUNDLES) if args.subcommand == "all" else [args.subcommand]
    ok = True
    for name in names:
        report = run_bundle(name)
        print(report.table(), flush=True)
        ok &= report.passed
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stokespatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a configured run")
    run.add_argument("config")
    run.add_argument("--output-dir", help=f"overrides ${OUTPUT_DIR_ENV} and the config")
    run.set_defaults(func=_cmd_run)

    res = sub.add_parser("resume", help="continue a run from a snapshot file")
    res.add_argument("snapshot")
    res.add_argument("config")
    res.add_argument("--output-dir", help=f"overrides ${OUTPUT_DIR_ENV} and the config")
    res.set_defaults(func=_cmd_resume)

    ver = sub.add_parser("verify", help="run a verification bundle and print its table")
    ver.add_argument("subcommand", choices=[*BUNDLES, "all"])
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
