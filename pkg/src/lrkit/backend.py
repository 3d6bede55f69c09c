"""Backend selection: compiled extension when importable, numpy otherwise.

``LRK_FORCE_FALLBACK=1`` forces the numpy path (used by the benchmark and by
tests that cross-check the two implementations).
"""

import os

import numpy as np

if os.environ.get("LRK_FORCE_FALLBACK"):
    from . import _fallback as _impl

    BACKEND = "fallback"
else:
    try:
        from . import _corekern as _impl

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - exercised via LRK_FORCE_FALLBACK
        from . import _fallback as _impl

        BACKEND = "fallback"


def fold_axis0(arr, weights):
    """Contract the first axis of ``arr`` against ``weights``.

    arr: (m, ...) real or complex; weights: (m, nx) real.
    Returns shape (..., nx).  Reduction order over m is fixed, so the result
    is reproducible run to run.
    """
    m = arr.shape[0]
    rest = arr.shape[1:]
    a2 = np.ascontiguousarray(arr.reshape(m, -1).T)
    ct = np.ascontiguousarray(weights.T)
    if np.iscomplexobj(a2):
        out = _impl.fold_first_z(np.ascontiguousarray(a2, dtype=np.complex128),
                                 np.ascontiguousarray(ct, dtype=np.float64))
    else:
        out = _impl.fold_first_d(np.ascontiguousarray(a2, dtype=np.float64),
                                 np.ascontiguousarray(ct, dtype=np.float64))
    return out.reshape(rest + (weights.shape[1],))


def stable_sum(v):
    """Deterministic pairwise sum of a 1-d array."""
    v = np.ascontiguousarray(v).ravel()
    if np.iscomplexobj(v):
        return _impl.pairwise_sum_z(np.ascontiguousarray(v, dtype=np.complex128))
    return _impl.pairwise_sum_d(np.ascontiguousarray(v, dtype=np.float64))
