"""Package-level thread-count setting.

Heavy operations (cost volume slices, per-view loss terms) consult this
module for how many worker threads to use. Work is partitioned into
fixed, disjoint output regions that are merged in a deterministic order,
so results are identical for any thread count; 1 is the reference setting.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

_num_threads = 1


def set_num_threads(n: int) -> None:
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    global _num_threads
    _num_threads = int(n)


def get_num_threads() -> int:
    return _num_threads


def run_tasks(tasks: Sequence[Callable[[], object]]) -> list[object]:
    """Run callables, possibly concurrently, returning results in task order."""
    if _num_threads == 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=_num_threads) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]
