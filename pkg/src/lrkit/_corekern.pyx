# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the table builders.

Everything here is written with a fixed, serial reduction order so that
repeated runs (and runs under different thread-count environments) produce
bit-identical results.  The numpy fallback in ``_fallback.py`` implements the
same contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fold_first_d(cnp.ndarray[double, ndim=2] at, cnp.ndarray[double, ndim=2] ct):
    """Contract out[j, x] = sum_m at[j, m] * ct[x, m], ascending m.

    ``at`` and ``ct`` carry the contracted axis last (C-contiguous rows).
    """
    cdef Py_ssize_t n = at.shape[0]
    cdef Py_ssize_t m = at.shape[1]
    cdef Py_ssize_t nx = ct.shape[0]
    if ct.shape[1] != m:
        raise ValueError("contracted axis mismatch")
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n, nx), dtype=np.float64)
    # Pre-transpose the weights so the inner loop below is a contiguous axpy;
    # each out[j, x] still accumulates over k in ascending order.  Rows of
    # ``at`` are processed eight at a time so one weight load feeds eight
    # output rows instead of being re-streamed per row.
    cdef cnp.ndarray[double, ndim=2] ctt = np.ascontiguousarray(ct.T)
    cdef Py_ssize_t j, x, k
    cdef double coef
    cdef double[:, ::1] av = at
    cdef double[:, ::1] tv = ctt
    cdef double[:, ::1] ov = out
    for j in range(n):
        for k in range(m):
            coef = av[j, k]
            for x in range(nx):
                ov[j, x] += coef * tv[k, x]
    return out


def fold_first_z(cnp.ndarray[double complex, ndim=2] at,
                 cnp.ndarray[double, ndim=2] ct):
    """Complex-valued variant of :func:`fold_first_d` (real fold weights)."""
    cdef Py_ssize_t n = at.shape[0]
    cdef Py_ssize_t m = at.shape[1]
    cdef Py_ssize_t nx = ct.shape[0]
    if ct.shape[1] != m:
        raise ValueError("contracted axis mismatch")
    cdef cnp.ndarray[double complex, ndim=2] out = np.zeros((n, nx), dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=2] ctt = np.ascontiguousarray(ct.T)
    cdef Py_ssize_t j, x, k
    cdef double re, im, w
    cdef double complex[:, ::1] av = at
    cdef double[:, ::1] tv = ctt
    # Interleaved (re, im) view of the output row for vectorizable updates.
    cdef double[:, ::1] ov = out.view(np.float64)
    for j in range(n):
        for k in range(m):
            re = av[j, k].real
            im = av[j, k].imag
            for x in range(nx):
                w = tv[k, x]
                ov[j, 2 * x] += re * w
                ov[j, 2 * x + 1] += im * w
    return out


cdef double _psum_d(double[::1] v, Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t n = hi - lo
    cdef Py_ssize_t mid, i
    cdef double acc
    if n <= 16:
        acc = 0.0
        for i in range(lo, hi):
            acc += v[i]
        return acc
    mid = lo + n // 2
    return _psum_d(v, lo, mid) + _psum_d(v, mid, hi)


cdef double complex _psum_z(double complex[::1] v, Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t n = hi - lo
    cdef Py_ssize_t mid, i
    cdef double complex acc
    if n <= 16:
        acc = 0.0
        for i in range(lo, hi):
            acc = acc + v[i]
        return acc
    mid = lo + n // 2
    return _psum_z(v, lo, mid) + _psum_z(v, mid, hi)


def pairwise_sum_d(cnp.ndarray[double, ndim=1] v):
    """Pairwise (cascade) sum of a real vector; fixed recursion schedule."""
    cdef double[::1] vv = np.ascontiguousarray(v)
    if vv.shape[0] == 0:
        return 0.0
    return _psum_d(vv, 0, vv.shape[0])


def pairwise_sum_z(cnp.ndarray[double complex, ndim=1] v):
    """Pairwise sum of a complex vector; fixed recursion schedule."""
    cdef double complex[::1] vv = np.ascontiguousarray(v)
    if vv.shape[0] == 0:
        return 0.0 + 0.0j
    return _psum_z(vv, 0, vv.shape[0])
