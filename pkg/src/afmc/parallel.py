"""Fan-out of per-path work over worker processes with an ordered merge.

Paths are cut into fixed-size index blocks that do not depend on the
worker count; each block is computed from its own per-path streams and the
blocks are concatenated in index order, so results are bit-identical for
any number of workers.
"""
from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor

import numpy as np

BLOCK = 2000


def blocks(M: int, block: int = BLOCK) -> list[tuple[int, int]]:
    return [(i, min(i + block, M)) for i in range(0, M, block)]


def _run(task, span):
    return task(*span)


def run_paths(task, M: int, workers: int = 1, block: int = BLOCK):
    """Evaluate ``task(start, stop)`` on every block and merge in path order.

    ``task`` must be picklable and return an array (or tuple of arrays)
    whose first axis indexes the paths of the block.
    """
    spans = blocks(M, block)
    if workers <= 1 or len(spans) == 1:
        parts = [task(*span) for span in spans]
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_run, [task] * len(spans), spans))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
