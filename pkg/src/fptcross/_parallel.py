"""Deterministic chunked RNG streams and an order-preserving parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK_PATHS = 2048


def worker_count() -> int:
    """Worker cap from ``FPT_THREADS`` (default 1); affects speed only."""
    raw = os.environ.get("FPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chunk_index),)))


def chunk_sizes(n_paths: int, chunk: int = CHUNK_PATHS) -> list[int]:
    full, rest = divmod(int(n_paths), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(fn: Callable[[int, int], T], n_paths: int, chunk: int = CHUNK_PATHS) -> list[T]:
    """Apply ``fn(chunk_index, chunk_size)`` to every chunk; results in chunk order."""
    sizes = chunk_sizes(n_paths, chunk)
    workers = min(worker_count(), max(1, len(sizes)))
    if workers == 1:
        return [fn(i, m) for i, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))
