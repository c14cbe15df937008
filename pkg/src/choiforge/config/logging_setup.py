"""
Logging setup for choiforge entry points.
Library modules only create loggers; handlers are installed here once.
"""

import logging
import sys
from typing import Optional

from pythonjsonlogger.json import JsonFormatter

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
JSON_FIELDS = "%(asctime)s %(name)s %(levelname)s %(message)s"


def setup_logging(level: str = "INFO", fmt: str = "text", stream: Optional[object] = None) -> None:
    """
    Install a single stderr handler on the root logger.

    Args:
        level: Logging level name
        fmt: "text" or "json"; json emits one object per line with the
            record's extra fields merged in
        stream: Target stream, stderr when unset
    """
    handler = logging.StreamHandler(stream or sys.stderr)
    if fmt == "json":
        handler.setFormatter(JsonFormatter(JSON_FIELDS))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())

    # cvxpy reports every compilation at INFO
    logging.getLogger("cvxpy").setLevel(logging.WARNING)
