"""Numpy implementations of the loop kernels in ``_kernels.pyx``."""
import numpy as np

from .errors import SingularSystem


def gauss_solve(M, rhs):
    """Solve ``M X = rhs`` by Gaussian elimination with partial pivoting."""
    a = np.array(M, dtype=np.float64, copy=True)
    b = np.array(rhs, dtype=np.float64, copy=True)
    n = a.shape[0]
    scale = np.abs(a).max() if n else 0.0
    if n and scale == 0.0:
        raise SingularSystem("matrix is zero")
    tiny = n * np.finfo(np.float64).eps * scale
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv = abs(a[p, k])
        if piv <= tiny:
            raise SingularSystem(f"pivot {piv:.3e} at column {k} below {tiny:.3e}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:, k] = 0.0
        a[k + 1:, k + 1:] -= np.outer(f, a[k, k + 1:])
        b[k + 1:] -= np.outer(f, b[k])
    for i in range(n - 1, -1, -1):
        b[i] = (b[i] - a[i, i + 1:] @ b[i + 1:]) / a[i, i]
    return b


def silhouette_samples(points, labels, n_labels):
    """Per-sample silhouette with Euclidean distance; rows are samples."""
    pts_t = np.ascontiguousarray(np.asarray(points, dtype=np.float64).T)
    labels = np.asarray(labels, dtype=np.int64)
    q = pts_t.shape[1]
    counts = np.bincount(labels, minlength=n_labels)
    out = np.zeros(q)
    for i in range(q):
        own = labels[i]
        if counts[own] < 2:
            continue
        # reducing over axis 0 accumulates coordinates in order, matching
        # the scalar loop exactly
        sq = np.add.reduce((pts_t[:, i:i + 1] - pts_t) ** 2, axis=0)
        sums = np.bincount(labels, weights=np.sqrt(sq), minlength=n_labels)
        a = sums[own] / (counts[own] - 1)
        others = (counts > 0) & (np.arange(n_labels) != own)
        b = (sums[others] / counts[others]).min()
        hi = max(a, b)
        if hi > 0.0:
            out[i] = (b - a) / hi
    return out
