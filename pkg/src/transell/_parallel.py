import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Worker cap from ``TRANSELL_THREADS``; defaults to the available cores."""
    env = os.environ.get("TRANSELL_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"TRANSELL_THREADS must be an integer, got {env!r}") from None
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def parallel_map(fn, items):
    """Ordered map over ``items``; threads only help for GIL-releasing work."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
