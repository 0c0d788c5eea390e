"""Deterministic replicate fan-out.

Each replicate owns its own seed stream, so results are a pure function of
the replicate index; threads only change wall time.  Results are collected
by index, making serial and threaded runs identical.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(requested: int | None = None) -> int:
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get("ERGODYN_THREADS", "").strip()
    if env.isdigit() and int(env) >= 1:
        return int(env)
    return 1


def replicate_map(fn, n: int, threads: int | None = None) -> list:
    """[fn(0), ..., fn(n-1)], optionally computed on a thread pool."""
    workers = thread_count(threads)
    if workers <= 1 or n <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))
