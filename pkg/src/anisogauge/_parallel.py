"""Thread fan-out controlled by ``ANISOGAUGE_THREADS``."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "ANISOGAUGE_THREADS"


def thread_count():
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items):
    """Ordered map; runs on a thread pool when more than one thread is allowed."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
