"""Compare the compiled extension against the pure-numpy fallback.

Times the two hot primitives (first-axis fold, deterministic pairwise sum)
on shapes representative of a kernel-table build, and checks that the two
implementations agree.  Run from the repository root:

    python3 benchmarks/bench_backends.py
"""

import os
import time

for _k in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
           "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(_k, "1")

import numpy as np

from lrkit import _fallback
from lrkit import backend

try:
    from lrkit import _corekern
except ImportError:
    _corekern = None


def _best_of(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_case(label, name, args, repeat=5):
    dt_fb, out_fb = _best_of(getattr(_fallback, name), args, repeat)
    line = f"{label:44s}  fallback {dt_fb * 1e3:9.2f} ms"
    if _corekern is not None:
        dt_ck, out_ck = _best_of(getattr(_corekern, name), args, repeat)
        dev = np.max(np.abs(np.asarray(out_ck) - np.asarray(out_fb)))
        scale = float(np.max(np.abs(np.asarray(out_fb)))) or 1.0
        line += (f"  compiled {dt_ck * 1e3:9.2f} ms"
                 f"  speedup x{dt_fb / dt_ck:6.2f}"
                 f"  rel dev {dev / scale:.1e}")
    else:
        line += "  compiled (unavailable)"
    print(line)


def main():
    print(f"active backend: {backend.BACKEND}")
    rng = np.random.default_rng(0)

    # Fold shapes as they occur in a d=3 kernel build: m quadrature rungs
    # contracted against per-site weight columns, for every grid point.
    m, cols, nx = 256, 32 ** 3, 61
    at_d = np.ascontiguousarray(rng.standard_normal((cols, m)))
    at_z = np.ascontiguousarray(at_d + 1j * rng.standard_normal((cols, m)))
    ct = np.ascontiguousarray(rng.standard_normal((nx, m)))

    run_case(f"fold_first_d  ({cols} x {m}) . ({nx} x {m})^T",
             "fold_first_d", (at_d, ct))
    run_case(f"fold_first_z  ({cols} x {m}) . ({nx} x {m})^T",
             "fold_first_z", (at_z, ct))

    n = 1 << 22
    v_d = np.ascontiguousarray(rng.standard_normal(n))
    v_z = np.ascontiguousarray(v_d + 1j * v_d[::-1])
    run_case(f"pairwise_sum_d ({n} doubles)", "pairwise_sum_d", (v_d,),
             repeat=9)
    run_case(f"pairwise_sum_z ({n} cdoubles)", "pairwise_sum_z", (v_z,),
             repeat=9)


if __name__ == "__main__":
    main()
