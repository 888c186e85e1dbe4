"""
Command-line entry point
Sets up logging and dispatches the pipeline sub-commands.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

from pythonjsonlogger import jsonlogger

from ovid import __version__
from ovid.cli import data, evaluation, modeling
from ovid.cli.common import OvidArgumentParser, flags_of
from ovid.config import settings
from ovid.errors import DataError, UsageError
from ovid.manifest import read_manifest, run_context

logger = logging.getLogger(__name__)


def setup_logging() -> None:
    """Configure root logging to stderr; JSON lines unless ENVIRONMENT=development"""
    handler = logging.StreamHandler(sys.stderr)

    if settings.environment.lower() == "development":
        # Dev: human-readable lines with timestamps
        handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
    else:
        # Production: one JSON object per line, extras included
        handler.setFormatter(jsonlogger.JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s"))

    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        handlers=[handler],
        force=True,
    )


def build_parser() -> OvidArgumentParser:
    parser = OvidArgumentParser(
        prog="ovid",
        description="Vandalism detection for OpenStreetMap changesets",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    data.register(subparsers)
    modeling.register(subparsers)
    evaluation.register(subparsers)

    p = subparsers.add_parser("replay", help="Re-run the command recorded in a run manifest")
    p.add_argument("--manifest", type=Path, required=True, help="manifest.json or its directory")
    p.set_defaults(handler=None)
    return parser


def run(argv: List[str]) -> None:
    """Parse argv and run one sub-command inside a run context"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.subcommand == "replay":
        manifest = read_manifest(args.manifest)
        logger.info(
            f"Replaying {manifest.subcommand}",
            extra={"subcommand": manifest.subcommand, "tool_version": manifest.tool_version},
        )
        if manifest.tool_version != __version__:
            logger.warning(
                "Manifest was written by another tool version",
                extra={"manifest_version": manifest.tool_version, "tool_version": __version__},
            )
        run(manifest.argv)
        return

    with run_context(args.subcommand, list(argv), flags_of(args)) as ctx:
        args.handler(args, ctx)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        run(argv)
    except UsageError as e:
        (e.parser or build_parser()).print_usage(sys.stderr)
        print(f"usage error: {e}", file=sys.stderr)
        return e.exit_code
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    setup_logging()
    sys.exit(main())
