"""``gridshare`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import DataError, ValidationError
from .pipeline import Pipeline

COMMANDS = ("partition", "resilience", "trade", "compare", "all")
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("gridshare")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshare",
        description="Partition a feeder into microgrids, rank their resilience, and simulate P2P energy sharing.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config's global seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    return parser


def run(command: str, config_path, seed: int | None = None, out=None) -> None:
    cfg = load_config(config_path).with_overrides(seed=seed, out=out)
    pipe = Pipeline(cfg)
    if command == "all":
        pipe.run_all()
    else:
        getattr(pipe, f"run_{command}")()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.seed is not None and args.seed < 0:
        log.error("--seed must be >= 0")
        return EXIT_VALIDATION
    try:
        run(args.command, args.config, args.seed, args.out)
    except ValidationError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_VALIDATION
    except (DataError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
