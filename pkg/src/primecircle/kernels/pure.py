"""Pure-numpy fallbacks for the compiled kernels.

Chunk sizes keep peak memory for the outer products around a few MB.
"""

import numpy as np

_CHUNK = 1 << 21


def exp_sums(support, weights, xis):
    """Sum_j weights[j] * exp(-2*pi*i*support[j]*xi) for each xi."""
    support = np.asarray(support, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    xis = np.asarray(xis, dtype=np.float64)
    out = np.empty(xis.shape[0], dtype=np.complex128)
    if support.size == 0:
        out[:] = 0.0
        return out
    step = max(1, _CHUNK // support.size)
    for lo in range(0, xis.shape[0], step):
        chunk = xis[lo:lo + step]
        phase = np.multiply.outer(chunk, support.astype(np.float64))
        out[lo:lo + step] = np.exp(-2j * np.pi * phase) @ weights
    return out


def dyadic_block_sums(targets, sources, lam, kmax):
    """Per-target sums of lam[x-y] over y in sources with x-y in (2^(k-1), 2^k].

    Block k=0 is the single difference x-y = 1.  Returns an array of
    shape (len(targets), kmax+1).
    """
    targets = np.asarray(targets, dtype=np.int64)
    sources = np.asarray(sources, dtype=np.int64)
    lam = np.asarray(lam, dtype=np.float64)
    nt = targets.shape[0]
    out = np.zeros((nt, kmax + 1), dtype=np.float64)
    if sources.size == 0 or nt == 0:
        return out
    bounds = 2 ** np.arange(kmax + 1, dtype=np.int64)
    step = max(1, _CHUNK // sources.size)
    for lo in range(0, nt, step):
        tch = targets[lo:lo + step]
        d = tch[:, None] - sources[None, :]
        valid = (d >= 1) & (d <= bounds[-1])
        dv = d[valid]
        k = np.searchsorted(bounds, dv, side="left")
        rows = np.broadcast_to(np.arange(tch.shape[0])[:, None], d.shape)[valid]
        flat = np.bincount(rows * (kmax + 1) + k, weights=lam[dv],
                           minlength=tch.shape[0] * (kmax + 1))
        out[lo:lo + step] = flat.reshape(tch.shape[0], kmax + 1)
    return out
