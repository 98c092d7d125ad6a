import logging
import sys
from typing import Optional

import click
from pythonjsonlogger import jsonlogger

from . import __version__
from .config import settings
from .api.commands import COMMANDS

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None, json_format: Optional[bool] = None) -> None:
    """Route all records to stderr, plain or JSON depending on settings"""
    level_name = (level or settings.log_level).upper()
    handler = logging.StreamHandler(sys.stderr)
    if settings.log_json if json_format is None else json_format:
        handler.setFormatter(jsonlogger.JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), handlers=[handler], force=True)


@click.group()
@click.version_option(__version__, prog_name="fraglab")
@click.option("--log-level", default=None, help="Overrides FRAGLAB_LOG_LEVEL")
@click.option("--log-json/--log-text", default=None, help="Overrides FRAGLAB_LOG_JSON")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Overrides FRAGLAB_THREADS")
def cli(log_level: Optional[str], log_json: Optional[bool], threads: Optional[int]) -> None:
    """Fragmentation lab for blockaded Rydberg chains and their lattice gauge theory."""
    configure_logging(log_level, log_json)
    if threads is not None:
        settings.threads = threads


for command in COMMANDS:
    cli.add_command(command)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
