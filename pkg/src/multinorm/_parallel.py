"""Thread-count plumbing shared by the enumeration loops."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_threads = None


def get_threads():
    if _threads is not None:
        return _threads
    env = os.environ.get("MULTINORM_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def set_threads(n):
    global _threads
    _threads = None if n is None else max(1, int(n))


def pmap(fn, items):
    """Ordered map; runs on a thread pool when more than one thread is configured."""
    items = list(items)
    n = get_threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
