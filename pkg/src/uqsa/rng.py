"""Seed handling for reproducible parallel Monte Carlo.

Worker ``i`` of a run with master seed ``s`` and ``k`` workers draws from
``PCG64(SeedSequence(s).spawn(k)[i])``.  Work is split into ``k`` contiguous
chunks (the first ``n % k`` chunks get one extra item) and results are merged
in worker order, so the output depends only on ``(s, k)`` and not on how many
threads execute the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def streams(seed: int, workers: int = 1):
    if workers < 1:
        raise ValueError("workers must be >= 1")
    children = np.random.SeedSequence(int(seed)).spawn(int(workers))
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def split(n: int, workers: int):
    base, extra = divmod(int(n), int(workers))
    return [base + (1 if i < extra else 0) for i in range(int(workers))]


def run_chunks(job, n: int, seed: int, workers: int = 1, threads=None):
    """Call ``job(rng, size, offset)`` once per worker and return the results in order."""
    sizes = split(n, workers)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    gens = streams(seed, workers)
    args = [(g, s, int(o)) for g, s, o in zip(gens, sizes, offsets) if s > 0]
    threads = workers if threads is None else max(1, min(int(threads), workers))
    if threads == 1 or len(args) == 1:
        return [job(*a) for a in args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: job(*a), args))
