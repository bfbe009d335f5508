"""Row-chunked evaluation of O(n^2) pair sums.

Every double sum in the package is split into fixed-size blocks of rows.
Each block returns per-row partial results; blocks are concatenated in row
order before the final reduction, so the result does not depend on how many
worker threads evaluated the blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

_threads: int | None = None


def set_threads(count: int | None) -> None:
    """Cap the number of worker threads (``None`` falls back to KNOT_THREADS)."""
    global _threads
    if count is not None and count < 1:
        raise ValueError("thread count must be positive")
    _threads = count


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("KNOT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def row_blocks(n: int, block: int) -> list[tuple[int, int]]:
    return [(start, min(n, start + block)) for start in range(0, n, block)]


def block_size(n: int, budget: int = 1 << 21) -> int:
    """Rows per block so that a block of n columns stays near ``budget`` entries."""
    return max(1, min(n, budget // max(n, 1)))


def map_blocks(func: Callable[[int, int], T], blocks: Sequence[tuple[int, int]]) -> list[T]:
    workers = get_threads()
    if workers == 1 or len(blocks) == 1:
        return [func(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: func(*ab), blocks))
