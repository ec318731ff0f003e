"""
Logging configuration: one stream handler printing "[LEVEL] message" lines.
"""

import logging
import os
from typing import Optional

LOG_FORMAT = "[%(levelname)s] %(message)s"
DEFAULT_LEVEL = "INFO"


def configure_logging(level: Optional[str] = None) -> None:
    """Install the package log handler on the root logger.

    The level falls back to BRIDGESIM_LOG_LEVEL, then INFO.
    """
    name = (level or os.getenv("BRIDGESIM_LOG_LEVEL", DEFAULT_LEVEL)).upper()
    numeric = getattr(logging, name, None)
    if not isinstance(numeric, int):
        numeric = logging.INFO

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_bridgesim", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._bridgesim = True
    root.addHandler(handler)
    root.setLevel(numeric)
