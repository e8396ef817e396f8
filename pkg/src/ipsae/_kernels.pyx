# cython: language_level=3
"""Compiled loop kernels.

Same signatures and results as :mod:`ipsae._fallback`; the silhouette kernel
reproduces the plain double loop bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY
from libc.float cimport DBL_EPSILON

from ipsae.errors import SingularSystem

cnp.import_array()


def gauss_solve(const double[:, ::1] M, const double[:, ::1] rhs):
    """Solve ``M X = rhs`` by Gaussian elimination with partial pivoting."""
    cdef Py_ssize_t n = M.shape[0], r = rhs.shape[1]
    cdef Py_ssize_t i, j, k, p
    cdef double piv, f, acc, t, scale = 0.0
    a_arr = np.array(M, dtype=np.float64, copy=True)
    b_arr = np.array(rhs, dtype=np.float64, copy=True)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] b = b_arr
    for i in range(n):
        for j in range(n):
            if fabs(a[i, j]) > scale:
                scale = fabs(a[i, j])
    cdef double tiny = n * DBL_EPSILON * scale
    if scale == 0.0 and n > 0:
        raise SingularSystem("matrix is zero")
    for k in range(n):
        p = k
        piv = fabs(a[k, k])
        for i in range(k + 1, n):
            if fabs(a[i, k]) > piv:
                piv = fabs(a[i, k])
                p = i
        if piv <= tiny:
            raise SingularSystem(f"pivot {piv:.3e} at column {k} below {tiny:.3e}")
        if p != k:
            for j in range(n):
                t = a[k, j]; a[k, j] = a[p, j]; a[p, j] = t
            for j in range(r):
                t = b[k, j]; b[k, j] = b[p, j]; b[p, j] = t
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            if f == 0.0:
                continue
            a[i, k] = 0.0
            for j in range(k + 1, n):
                a[i, j] -= f * a[k, j]
            for j in range(r):
                b[i, j] -= f * b[k, j]
    for j in range(r):
        for i in range(n - 1, -1, -1):
            acc = b[i, j]
            for k in range(i + 1, n):
                acc -= a[i, k] * b[k, j]
            b[i, j] = acc / a[i, i]
    return b_arr


def silhouette_samples(const double[:, ::1] points, const cnp.int64_t[::1] labels,
                       Py_ssize_t n_labels):
    """Per-sample silhouette with Euclidean distance; rows are samples."""
    cdef Py_ssize_t q = points.shape[0], m = points.shape[1]
    cdef Py_ssize_t i, j, k, l, own
    cdef double acc, diff, a, b, mean, hi
    out_arr = np.zeros(q, dtype=np.float64)
    sums_arr = np.zeros(n_labels, dtype=np.float64)
    counts_arr = np.zeros(n_labels, dtype=np.int64)
    cdef double[::1] out = out_arr
    cdef double[::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    for i in range(q):
        counts[labels[i]] += 1
    for i in range(q):
        own = labels[i]
        if counts[own] < 2:
            continue
        for l in range(n_labels):
            sums[l] = 0.0
        for j in range(q):
            if j == i:
                continue
            acc = 0.0
            for k in range(m):
                diff = points[i, k] - points[j, k]
                acc = acc + diff * diff
            sums[labels[j]] += sqrt(acc)
        a = sums[own] / (counts[own] - 1)
        b = INFINITY
        for l in range(n_labels):
            if l == own or counts[l] == 0:
                continue
            mean = sums[l] / counts[l]
            if mean < b:
                b = mean
        hi = a if a > b else b
        if hi > 0.0:
            out[i] = (b - a) / hi
    return out_arr
