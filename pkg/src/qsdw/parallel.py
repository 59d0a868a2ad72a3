"""Order-preserving parallel map capped by ``QSDW_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("QSDW_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"QSDW_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"QSDW_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn, items):
    """``[fn(x) for x in items]``, possibly on threads; result order follows ``items``."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
