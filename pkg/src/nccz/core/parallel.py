"""
parallel.py

Deterministic chunked map used by the per-cell kernels. Work is split into
fixed chunks whose boundaries never depend on the number of workers, and the
results are concatenated in chunk order, so single-threaded and threaded runs
produce identical arrays.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 256

_max_workers: int = 1


def set_max_workers(count: int) -> None:
    """Cap the worker pool used by map_chunks"""
    global _max_workers

    if count < 1:
        raise ValueError(f"Worker count must be at least 1, got {count}")

    _max_workers = count
    logger.debug("Worker pool capped at %d threads", count)


def get_max_workers() -> int:
    return _max_workers


def chunk_slices(total: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[slice]:
    if chunk_size < 1:
        raise ValueError(f"Chunk size must be positive, got {chunk_size}")
    return [slice(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def map_chunks(
    func: Callable[[slice], npt.NDArray],
    total: int,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> npt.NDArray:
    """
    Evaluate func on consecutive index ranges and stack the results

    Parameters
    ----------
    func: Callable[[slice], NDArray]
        Computes the rows for one index range; results are concatenated
        along axis 0
    total: int
        Number of rows
    chunk_size: int
        Rows per chunk

    Returns
    -------
    NDArray
        The concatenated rows in index order
    """
    slices = chunk_slices(total, chunk_size)

    if len(slices) == 0:
        return np.asarray(func(slice(0, 0)))

    if _max_workers <= 1 or len(slices) == 1:
        results = [func(s) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=_max_workers) as executor:
            results = list(executor.map(func, slices))

    return np.concatenate(results, axis=0)
