"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime/stage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import canonicalize, parse_config
from .errors import ConfigError, FormatError
from .io import inspect_field
from .presets import PRESETS, preset_text
from .runner import StageError, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


def _load(source: str):
    path = Path(source)
    if path.exists():
        return parse_config(path.read_text())
    if source in PRESETS:
        return parse_config(preset_text(source))
    raise ConfigError(f"{source}: no such file or preset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="madelab", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a config file or preset name")
    run.add_argument("config")
    run.add_argument("--output-dir", help="override [output] directory")
    run.add_argument("--seed", type=int, help="override [trajectories] seed")
    run.add_argument("--threads", type=int, default=1, help="worker threads for the trajectory stage")

    val = sub.add_parser("validate", help="parse and validate a config, print its canonical form")
    val.add_argument("config")

    ins = sub.add_parser("inspect", help="print a field file header without reading the payload")
    ins.add_argument("field_file")

    pre = sub.add_parser("presets", help="list built-in scenarios or print one")
    pre.add_argument("name", nargs="?")
    for p in (run, val, ins, pre):
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.ERROR if quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    say = (lambda *a: None) if quiet else print
    try:
        if args.command == "presets":
            if args.name:
                print(preset_text(args.name), end="")
            else:
                for name in PRESETS:
                    print(name)
            return EXIT_OK
        if args.command == "validate":
            print(canonicalize(_load(args.config)), end="")
            return EXIT_OK
        if args.command == "inspect":
            h = inspect_field(args.field_file)
            print(f"dtype {h.dtype}\ndims {h.dims}\npoints {' '.join(map(str, h.points))}\n"
                  f"extents {' '.join(repr(e) for e in h.extents)}\ntime {h.time!r}")
            return EXIT_OK
        cfg = _load(args.config).with_overrides(seed=args.seed, directory=args.output_dir)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        manifest = run_scenario(cfg, threads=args.threads)
        say(f"wrote {len(manifest.outputs)} artifacts to {cfg.output.directory}")
        for w in manifest.warnings:
            say(f"warning: {w}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
