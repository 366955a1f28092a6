"""Order-preserving process pool and seed derivation."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Iterable, Union

import numpy as np


def resolve_workers(workers: Union[int, str, None]) -> int:
    if workers in (None, "auto"):
        return max(1, os.cpu_count() or 1)
    n = int(workers)
    if n < 1:
        raise ValueError("workers must be >= 1 or 'auto'")
    return n


def pmap(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """``list(map(fn, items))`` evaluated on ``workers`` processes, in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def mapper(workers: int) -> Callable:
    return partial(pmap, workers=workers)


def derive_seed(master: int, *key: int) -> int:
    """64-bit child seed of ``master`` for the spawn path ``key``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
