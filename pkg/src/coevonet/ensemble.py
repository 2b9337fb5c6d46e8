import logging
import multiprocessing as mp
import os
from collections.abc import Callable, Sequence
from typing import TypeVar

__all__ = ["THREADS_VARIABLE", "worker_count", "run_ensemble"]

logger = logging.getLogger(__name__)

THREADS_VARIABLE = "COEVONET_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count(tasks: int, requested: int | None = None) -> int:
    """Pool size: at most the task count, the CPU count and the COEVONET_THREADS cap"""
    limit = requested if requested is not None else os.cpu_count() or 1
    cap = os.environ.get(THREADS_VARIABLE)
    if cap:
        try:
            limit = min(limit, int(cap))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_VARIABLE, cap)
    return max(1, min(limit, tasks))


def run_ensemble(task: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """Evaluate ``task`` on every item, in a worker pool when more than one worker is allowed

    ``task`` must be picklable (a module-level function or a partial of one). Results come back in
    item order whatever the scheduling.
    """
    processes = worker_count(len(items), threads)
    if processes <= 1 or len(items) <= 1:
        return [task(item) for item in items]
    logger.info("running %d ensemble members on %d workers", len(items), processes)
    pool = mp.Pool(processes)
    try:
        results = pool.map(task, items)
    finally:
        pool.close()
        pool.join()
    return results
