# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: pairwise distance matrices and k-NN mean distances.

Mirrors the contract of `reidflow._kernels._fallback` with explicit per-pair
loops (no cancellation-prone matmul tricks), so both backends agree to within
a few ulps.
"""

from libc.math cimport sqrt
from libc.stdlib cimport malloc, free

import numpy as np

BACKEND = "ext"


cdef inline double _row_norm(const double[:, ::1] a, Py_ssize_t i) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(a.shape[1]):
        acc += a[i, j] * a[i, j]
    return sqrt(acc)


def pairwise_distances(x, y, str metric):
    """Dense distance matrix between the rows of `x` and `y`."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError("inputs must be 2-D with matching width")
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t m = yv.shape[0]
    cdef Py_ssize_t d = xv.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, t
    cdef double acc, diff, val
    cdef double[::1] nx, ny

    if metric == "euclidean":
        with nogil:
            for i in range(n):
                for j in range(m):
                    acc = 0.0
                    for t in range(d):
                        diff = xv[i, t] - yv[j, t]
                        acc += diff * diff
                    ov[i, j] = sqrt(acc)
        return out

    if metric == "cosine":
        nx = np.empty(n, dtype=np.float64)
        ny = np.empty(m, dtype=np.float64)
        with nogil:
            for i in range(n):
                nx[i] = _row_norm(xv, i)
            for j in range(m):
                ny[j] = _row_norm(yv, j)
            for i in range(n):
                for j in range(m):
                    if nx[i] == 0.0 and ny[j] == 0.0:
                        ov[i, j] = 0.0
                    elif nx[i] == 0.0 or ny[j] == 0.0:
                        ov[i, j] = 1.0
                    else:
                        acc = 0.0
                        for t in range(d):
                            acc += xv[i, t] * yv[j, t]
                        val = 1.0 - acc / (nx[i] * ny[j])
                        if val < 0.0:
                            val = 0.0
                        elif val > 2.0:
                            val = 2.0
                        ov[i, j] = val
        return out

    raise ValueError(f"unknown metric {metric!r}")


cdef inline void _swap(double* a, Py_ssize_t x, Py_ssize_t y) noexcept nogil:
    cdef double t = a[x]
    a[x] = a[y]
    a[y] = t


cdef void _select_smallest(double* a, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    """Quickselect: partition `a` so its k smallest values occupy a[0:k].

    Hoare partitioning with a median-of-three pivot; deterministic for a
    given input, so repeated calls give identical results.
    """
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = n - 1
    cdef Py_ssize_t i, j, mid
    cdef double pivot
    if k >= n:
        return
    while lo < hi:
        mid = lo + (hi - lo) // 2
        if a[mid] < a[lo]:
            _swap(a, mid, lo)
        if a[hi] < a[lo]:
            _swap(a, hi, lo)
        if a[hi] < a[mid]:
            _swap(a, hi, mid)
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                _swap(a, i, j)
                i += 1
                j -= 1
        if j >= k:
            hi = j
        elif i <= k - 1:
            lo = i
        else:
            break


def knn_mean_from_matrix(d, int k):
    """Per-row mean of the k smallest off-diagonal entries of a square matrix."""
    cdef double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = dv.shape[0]
    if dv.shape[1] != n:
        raise ValueError("matrix must be square")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range for n={n}")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, w
    cdef double acc
    cdef double* buf
    with nogil:
        buf = <double*> malloc((n - 1) * sizeof(double))
        if buf == NULL:
            with gil:
                raise MemoryError()
        for i in range(n):
            w = 0
            for j in range(n):
                if j != i:
                    buf[w] = dv[i, j]
                    w += 1
            _select_smallest(buf, n - 1, k)
            acc = 0.0
            for j in range(k):
                acc += buf[j]
            ov[i] = acc / k
        free(buf)
    return out
