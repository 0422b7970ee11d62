import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096

# Purpose keys keep independent uses of one master seed apart.
STREAM_NOISE = 1
STREAM_SCORES = 2
STREAM_STRUCTURED = 3
STREAM_BRUTAL = 4

T = TypeVar("T")
R = TypeVar("R")


def substream(seed: int, *keys: int) -> np.random.Generator:
    """
    Build a generator that is a pure function of the seed and the keys.

    Args:
        seed (int): Master seed.
        *keys (int): Purpose and block identifiers.

    Returns:
        np.random.Generator: PCG64 generator seeded from SeedSequence([seed, *keys]).
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit child seed, deterministic in (seed, keys)."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def blocks(total: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """Split ``total`` items into ``(block_index, size)`` pairs of fixed width."""
    return [
        (index, min(block_size, total - start))
        for index, start in enumerate(range(0, total, block_size))
    ]


def map_tasks(work: Callable[[T], R], tasks: Sequence[T], threads: Optional[int] = 1) -> list[R]:
    """Apply ``work`` to every task, in parallel when asked, returning results in task order."""
    workers = max(1, int(threads or 1))
    if workers == 1 or len(tasks) <= 1:
        return [work(task) for task in tasks]
    logger.debug("Dispatching %d tasks on %d threads", len(tasks), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, tasks))


def map_blocks(
    work: Callable[[int, int], R], total: int, threads: Optional[int] = 1, block_size: int = BLOCK_SIZE
) -> list[R]:
    """
    Run ``work(block_index, size)`` over every block and return results in block order.

    The block partition does not depend on the thread count, so the output is identical
    for any number of workers.
    """
    return map_tasks(lambda item: work(*item), blocks(total, block_size), threads)


def concat(parts: Iterable[np.ndarray]) -> np.ndarray:
    return np.concatenate(list(parts), axis=0)
