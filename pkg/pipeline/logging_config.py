"""
Logging setup for the command-line pipeline.

Library modules only obtain loggers; handlers are installed here, once, by
the CLI entry point.
"""

import logging
import sys

from pythonjsonlogger.json import JsonFormatter

JSON_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"
PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: str = "INFO", plain: bool = False) -> None:
    """
    Route all log records to stderr.

    Args:
        level: root log level name
        plain: use the text format instead of JSON lines
    """
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")

    if plain:
        logging.basicConfig(level=numeric, format=PLAIN_FORMAT, stream=sys.stderr, force=True)
        return

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter(JSON_FORMAT))
    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(numeric)
