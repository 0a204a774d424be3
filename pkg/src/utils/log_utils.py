# ============================================================
# File: log_utils.py
# Revision: Rev.1
# Purpose: Tagged logging on stderr ("[INFO] ...", "[WARN] ...");
#          stdout carries command output only.
# ============================================================

import logging
import os
import sys

from utils.config import DEFAULT_LOG_LEVEL, LOG_ENV_VAR

_FORMAT = "[%(levelname)s] %(message)s"
_configured = False


class _FlushingHandler(logging.StreamHandler):
    """Writes to whatever sys.stderr is at emit time."""

    def emit(self, record):
        self.stream = sys.stderr
        super().emit(record)
        self.flush()


def _configure_root():
    global _configured
    if _configured:
        return
    logging.addLevelName(logging.WARNING, "WARN")
    root = logging.getLogger("resinet")
    handler = _FlushingHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT))
    root.addHandler(handler)
    level = os.environ.get(LOG_ENV_VAR, DEFAULT_LOG_LEVEL).upper()
    root.setLevel(getattr(logging, level, logging.INFO))
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Return a child of the ``resinet`` logger, configuring it once."""
    _configure_root()
    short = name.rsplit(".", 1)[-1]
    return logging.getLogger(f"resinet.{short}")


def set_level(level: str) -> None:
    _configure_root()
    logging.getLogger("resinet").setLevel(getattr(logging, level.upper(), logging.INFO))
