"""Deterministic random substreams.

Every random quantity is drawn from a generator keyed by a tuple of
non-negative integers (seed, purpose, index, ...). Work that is split across
threads or processes therefore reproduces bit-identically no matter how it is
scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# purpose tags keep unrelated streams apart even when they share a seed
MULTIPLIER = 1
SUP_SCORE = 2
DGP = 3
BOOTSTRAP_SEED = 4

BLOCK = 64


def generator(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def derive_seed(*key: int) -> int:
    """Derive a 63-bit integer seed from a key tuple."""
    state = np.random.SeedSequence([int(k) for k in key]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def normal_multipliers(seed: int, purpose: int, B: int, n: int, threads: int = 1) -> np.ndarray:
    """Draw a ``B x n`` matrix of i.i.d. standard normals.

    Rows are produced in fixed blocks of ``BLOCK`` draws, block ``j`` coming
    from the stream ``(seed, purpose, j)``, so the matrix does not depend on
    ``threads``.
    """
    out = np.empty((B, n))
    starts = range(0, B, BLOCK)

    def fill(start: int) -> None:
        stop = min(start + BLOCK, B)
        gen = generator(seed, purpose, start // BLOCK)
        out[start:stop] = gen.standard_normal((stop - start, n))

    if threads > 1 and B > BLOCK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    return out
