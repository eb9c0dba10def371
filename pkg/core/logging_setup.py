"""
Logging configuration for the command line.
Uses rich's handler when rich is installed.
"""

import logging
from typing import Optional

try:
    from rich.console import Console
    from rich.logging import RichHandler

    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

_FORMAT = "%(name)s: %(message)s"


def setup_logging(verbosity: int = 0, console: Optional[object] = None) -> logging.Logger:
    """
    Install one handler on the root logger.

    Args:
        verbosity: 0 for warnings, 1 for info, 2 or more for debug
        console: Optional rich console to log through (stderr by default)

    Returns:
        logging.Logger: the root logger
    """
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_cocycle_lab", False):
            root.removeHandler(handler)

    handler: logging.Handler
    if RICH_AVAILABLE:
        handler = RichHandler(
            console=console or Console(stderr=True),
            show_path=False,
            rich_tracebacks=False,
            markup=False,
        )
        handler.setFormatter(logging.Formatter(_FORMAT))
    else:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s " + _FORMAT))
    handler._cocycle_lab = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)
    return root
