# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernels; see ``_pykernels`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def normalized_csr(pairs, weights, Py_ssize_t num_nodes):
    pa = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    wa = np.ascontiguousarray(weights, dtype=np.float64)
    if pa.shape[0] != wa.shape[0]:
        raise ValueError("pairs and weights differ in length")
    if pa.shape[0]:
        if pa.min() < 0 or pa.max() >= num_nodes:
            raise ValueError("pair index out of range")
        key = pa[:, 0] * num_nodes + pa[:, 1]
        if np.any(key[1:] < key[:-1]):
            order = np.argsort(key, kind="stable")
            pa, wa = np.ascontiguousarray(pa[order]), np.ascontiguousarray(wa[order])
    cdef const cnp.int64_t[:, :] p = pa
    cdef const double[:] w = wa
    cdef Py_ssize_t m = p.shape[0], n = num_nodes, k, i, j, pos
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indptr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indices = np.empty(m + n, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] data = np.empty(m + n, dtype=np.float64)
    cdef double[:] deg = np.zeros(n, dtype=np.float64)
    cdef double[:] dinv = np.empty(n, dtype=np.float64)
    cdef bint placed

    for k in range(m):
        deg[p[k, 0]] += w[k]
        indptr[p[k, 0] + 1] += 1
    for i in range(n):
        dinv[i] = 1.0 / sqrt(deg[i] + 1.0)
        indptr[i + 1] += indptr[i] + 1

    # pairs are sorted, so each row's columns arrive in order; the self-loop
    # is slotted in before the first column greater than i
    k = 0
    for i in range(n):
        pos = indptr[i]
        placed = False
        while k < m and p[k, 0] == i:
            j = p[k, 1]
            if not placed and j > i:
                indices[pos] = i
                data[pos] = dinv[i] * 1.0 * dinv[i]
                pos += 1
                placed = True
            indices[pos] = j
            data[pos] = dinv[i] * w[k] * dinv[j]
            pos += 1
            k += 1
        if not placed:
            indices[pos] = i
            data[pos] = dinv[i] * 1.0 * dinv[i]
    return indptr, indices, data


def csr_matmul(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
               const double[:] data, x):
    cdef const double[:, :] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = indptr.shape[0] - 1, f = xv.shape[1], i, k, c, j
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n, f), dtype=np.float64)
    cdef double[:, :] ov = out
    cdef double a
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            a = data[k]
            j = indices[k]
            for c in range(f):
                ov[i, c] += a * xv[j, c]
    return out
