"""Global worker-pool setting and an order-preserving parallel map."""

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

_local = threading.local()


def _default_n_jobs():
    return os.cpu_count() or 1


def get_n_jobs():
    """Number of worker threads used by scans, bootstrap reps and replicates."""
    n_jobs = getattr(_local, "n_jobs", None)
    return _default_n_jobs() if n_jobs is None else n_jobs


def set_n_jobs(n_jobs):
    if n_jobs is not None and n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    _local.n_jobs = n_jobs


@contextmanager
def config_context(n_jobs=None):
    """Temporarily cap the worker pool (``None`` restores the default)."""
    old = getattr(_local, "n_jobs", None)
    set_n_jobs(n_jobs)
    try:
        yield
    finally:
        _local.n_jobs = old


def parallel_map(func, items, n_jobs=None):
    """``list(map(func, items))``, run on a thread pool when ``n_jobs > 1``.

    Work items must write disjoint outputs; results come back in input order
    so the outcome never depends on scheduling.
    """
    items = list(items)
    n_jobs = get_n_jobs() if n_jobs is None else n_jobs
    if n_jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    # threading.local does not propagate; pin workers to serial inner loops
    def run(item):
        set_n_jobs(1)
        return func(item)

    with ThreadPoolExecutor(max_workers=min(n_jobs, len(items))) as pool:
        return list(pool.map(run, items))
