"""Replica-level parallelism with order-stable results."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from . import _backend


def split(total: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous ``[start, stop)`` ranges covering ``range(total)``."""
    parts = max(1, min(parts, total))
    edges = [total * i // parts for i in range(parts + 1)]
    return [(edges[i], edges[i + 1]) for i in range(parts)]


class Workers:
    """Run self-contained tasks serially or on a process pool.

    Results always come back in task order, and every task derives its
    random numbers from its own keys, so the worker count never changes
    the output.
    """

    def __init__(self, count: int = 1):
        self.count = max(1, int(count))
        self._pool = None

    def __enter__(self):
        if self.count > 1:
            self._pool = ProcessPoolExecutor(
                max_workers=self.count,
                initializer=_backend.set_backend,
                initargs=(_backend.backend_name(),),
            )
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def run(self, fn, tasks):
        if self._pool is None or len(tasks) <= 1:
            return [fn(*t) for t in tasks]
        futures = [self._pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]

    def map_ranges(self, fn, total, *args):
        """``fn(start, stop, *args)`` over a split of ``range(total)``."""
        return self.run(fn, [(s, e) + args for s, e in split(total, self.count)])
