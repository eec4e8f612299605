"""Command-line entry point.

Subcommands: simulate | emulate | dataset | energy | sweep. Exit codes:
0 success (including unconverged training runs), 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigurationError
from .runner import MODE_RUNNERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optoperceptron",
        description="Digital twin of an opto-magnetic perceptron.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_text in [
        ("simulate", "train the abstract perceptron and export plot CSVs"),
        ("emulate", "train against the emulated write/read hardware"),
        ("dataset", "export the 27-pattern dataset"),
        ("energy", "account a training run's write/read energy"),
        ("sweep", "run many seeds and summarize convergence"),
    ]:
        p = sub.add_parser(mode, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="config file path")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument(
            "--frames", action="store_true", help="dump PGM frames (emulate mode)"
        )
        p.add_argument(
            "--verbose", action="store_true", help="full trace plus weight snapshots"
        )
        if mode == "sweep":
            p.add_argument("--seeds", type=int, default=None, help="override sweep.seeds")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides: dict[str, str] = {}
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.frames:
        overrides["run.dump_frames"] = "true"
    if args.verbose:
        overrides["run.trace_verbosity"] = "2"
    if getattr(args, "seeds", None) is not None:
        overrides["sweep.seeds"] = str(args.seeds)
    try:
        cfg = load_config(args.config, overrides)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        summary = MODE_RUNNERS[args.mode](cfg, args.out, cfg["run.seed"])
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
