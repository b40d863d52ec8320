"""
Ordered thread-pool helpers.

Every parallel path in the services goes through ``parallel_map`` so results
come back in input order and reductions stay bit-stable for any worker count.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def worker_count(requested: int | None = None) -> int:
    """Resolve the worker cap: explicit argument, then ENTROCERT_THREADS, then cpu count."""
    if requested is not None and requested > 0:
        return requested
    configured = None
    try:
        from django.conf import settings
        if settings.configured:
            configured = getattr(settings, 'ENTROCERT_THREADS', None)
    except ImportError:
        pass
    if configured is None:
        configured = os.getenv('ENTROCERT_THREADS')
    try:
        configured = int(configured) if configured is not None else 0
    except ValueError:
        logger.warning("Ignoring non-integer ENTROCERT_THREADS=%r", configured)
        configured = 0
    return configured if configured > 0 else (os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    items = list(items)
    n_workers = min(worker_count(workers), max(len(items), 1))
    if n_workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, items))
