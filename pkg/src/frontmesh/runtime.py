"""Physical execution of per-rank compute phases.

Logical ranks define the algorithm; this pool only decides where their
pure compute tasks run. Results are always collected in rank order, so
output is identical whether tasks run serially or on a process pool.
Worker processes sidestep the GIL for the heavy phases; task functions
must be module-level and payloads picklable.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


class RankPool:
    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be at least 1")
        self.workers = workers
        self._executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def map(self, fn, payloads) -> list:
        """Apply fn to each payload; results ordered like the payloads."""
        payloads = list(payloads)
        if self._executor is None or len(payloads) <= 1:
            return [fn(p) for p in payloads]
        return list(self._executor.map(fn, payloads))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
