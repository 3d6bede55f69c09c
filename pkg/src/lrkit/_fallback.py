"""Pure-numpy implementations of the compiled inner loops.

Selected by :mod:`lrkit.backend` when the extension is unavailable or when
``LRK_FORCE_FALLBACK`` is set.  numpy's core loops are single threaded, so
these are as reproducible as the compiled versions, just slower on the big
fold contractions.
"""

import numpy as np


def fold_first_d(at, ct):
    # out[j, x] = sum_m at[j, m] ct[x, m]; optimize=False keeps the reduction
    # a fixed-order nditer loop instead of a BLAS dispatch.
    return np.einsum("jm,xm->jx", at, ct, optimize=False)


def fold_first_z(at, ct):
    return np.einsum("jm,xm->jx", at, ct, optimize=False)


def pairwise_sum_d(v):
    # np.sum on a contiguous 1-d array is already a pairwise cascade.
    return float(np.sum(v))


def pairwise_sum_z(v):
    return complex(np.sum(v))
