"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set PCL_PURE=1 to force the pure-numpy implementations.
"""

import os

import numpy as np

from . import pure

COMPILED = False

if os.environ.get("PCL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels

        COMPILED = True
    except ImportError:
        _ckernels = None
else:
    _ckernels = None


def exp_sums(support, weights, xis):
    if COMPILED:
        return _ckernels.exp_sums(
            np.ascontiguousarray(support, dtype=np.int64),
            np.ascontiguousarray(weights, dtype=np.float64),
            np.ascontiguousarray(xis, dtype=np.float64),
        )
    return pure.exp_sums(support, weights, xis)


def dyadic_block_sums(targets, sources, lam, kmax):
    if COMPILED:
        return _ckernels.dyadic_block_sums(
            np.ascontiguousarray(targets, dtype=np.int64),
            np.ascontiguousarray(sources, dtype=np.int64),
            np.ascontiguousarray(lam, dtype=np.float64),
            int(kmax),
        )
    return pure.dyadic_block_sums(targets, sources, lam, kmax)
