"""Environment-driven settings shared by the engine and the command line."""

import logging
import os

# ===================== ENVIRONMENT =====================
LOG_LEVEL = os.environ.get("GEP_LOG_LEVEL", "WARNING").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def thread_count():
    """Number of joblib workers allowed by GEP_THREADS (at least 1)."""
    raw = os.environ.get("GEP_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ValueError(f"GEP_THREADS must be an integer, got {raw!r}")
    return max(1, threads)


def configure_logging(level=None):
    """Install one stream handler on the root logger, replacing an earlier one."""
    level = (level or LOG_LEVEL).upper()
    root = logging.getLogger()
    for old in [h for h in root.handlers if getattr(h, "_gep_handler", False)]:
        root.removeHandler(old)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._gep_handler = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, level, logging.WARNING))
