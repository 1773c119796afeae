"""Order-preserving thread pool and the package's seeded random streams.

Random draws come from numpy's PCG64 bit generator.  The stream with keys
``(tag, j)`` of a run seeded with ``seed`` is
``PCG64(SeedSequence(seed, spawn_key=(tag, j)))``, so a block of draws
depends only on (seed, tag, block index) and never on how blocks are
scheduled across threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 4096
RNG_NAME = "numpy.random.PCG64 via SeedSequence(seed, spawn_key=(tag, block)), numpy %s" % np.__version__


def threads():
    """Worker count from WDRO_THREADS (default: machine parallelism)."""
    env = os.environ.get("WDRO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(fn, items):
    """``[fn(x) for x in items]`` evaluated on a thread pool, results in input order."""
    items = list(items)
    nt = min(threads(), len(items))
    if nt <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nt) as ex:
        return list(ex.map(fn, items))


def stream(seed, *keys):
    """Independent generator identified by ``keys`` within the family seeded by ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def normal_draws(seed, k, dim, tag=0):
    """``k`` rows of ``dim`` standard normals, generated in fixed-size blocks."""
    nblocks = -(-k // BLOCK)

    def block(b):
        rows = min(BLOCK, k - b * BLOCK)
        return stream(seed, tag, b).standard_normal((rows, dim))

    out = pmap(block, range(nblocks))
    return np.vstack(out) if out else np.zeros((0, dim))
