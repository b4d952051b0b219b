import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from ..config.defaults import DEFAULT_THREADS, THREADS_ENV_VAR

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def thread_cap(requested: Optional[int] = None) -> int:
    threads = requested or DEFAULT_THREADS
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            threads = min(threads, max(1, int(raw)))
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
    return max(1, threads)


class WorkerPool:
    """Thread pool for independent PDE solves.

    scipy's sparse factorisation releases the GIL, so threads overlap the
    expensive part of each solve. Results always come back in input order.
    """

    def __init__(self, threads: Optional[int] = None):
        self._threads = thread_cap(threads)
        self._executor: Optional[ThreadPoolExecutor] = None
        self._lock = threading.Lock()

    @property
    def threads(self) -> int:
        return self._threads

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        items = list(items)
        if self._threads == 1 or len(items) <= 1:
            return [fn(item) for item in items]

        with self._lock:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=self._threads,
                                                    thread_name_prefix="solve")
            executor = self._executor
        return list(executor.map(fn, items))

    def shutdown(self) -> None:
        with self._lock:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.shutdown()


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    with WorkerPool(threads) as pool:
        return pool.map(fn, items)
