"""
Bounded thread pool for independent sample evaluations.
Results always come back in input order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Set once by the CLI from --threads
_default_threads = 1


def set_default_threads(threads: int) -> None:
    """Set the pool size used when a caller does not pass one."""
    global _default_threads
    _default_threads = max(1, int(threads))


def get_default_threads() -> int:
    return _default_threads


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 0) -> List[R]:
    """
    Map ``func`` over ``items`` with at most ``threads`` workers.

    Args:
        func: Pure function of one item
        items: Inputs, drawn completely before any work starts
        threads: Pool size; 0 means the process-wide default

    Returns:
        list: Results in input order
    """
    work = list(items)
    threads = threads or _default_threads
    if threads <= 1 or len(work) <= 1:
        return [func(item) for item in work]
    logger.debug("mapping %d items over %d threads", len(work), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, work))
