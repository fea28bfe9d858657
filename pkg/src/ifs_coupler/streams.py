"""Counter-style random substreams.

A stream is addressed by ``(seed, purpose, generation, block)``; points are
grouped into fixed blocks of :data:`BLOCK` consecutive indices, so the
numbers a point receives never depend on how work is split across threads.
"""

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np

BLOCK = 512

# purpose tags keep the streams of different experiments disjoint
MAIN = 0
BURN_IN = 1
COUPLING = 2
TRAJECTORY = 3
AUDIT = 4


def substream(seed, generation=0, block=0, purpose=MAIN):
    if int(seed) < 0:
        raise ValueError("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(generation), int(block)))
    return np.random.default_rng(ss)


def block_slices(n):
    return [slice(start, min(start + BLOCK, n)) for start in range(0, n, BLOCK)]


def uniforms(seed, generation, n, draws, purpose=MAIN):
    """Uniforms of shape ``(n, draws)``; row ``i`` depends only on (seed, purpose, generation, i // BLOCK)."""
    out = np.empty((n, draws))
    for b, sl in enumerate(block_slices(n)):
        out[sl] = substream(seed, generation, b, purpose).random((sl.stop - sl.start, draws))
    return out


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("IFS_COUPLER_THREADS", "1"))
    return max(1, int(threads))


def map_blocks(fn, n, threads=None):
    """Apply ``fn(block_index, slice)`` over all blocks; results come back in block order."""
    slices = block_slices(n)
    threads = resolve_threads(threads)
    if threads == 1 or len(slices) <= 1:
        return [fn(b, sl) for b, sl in enumerate(slices)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda item: fn(*item), enumerate(slices)))
