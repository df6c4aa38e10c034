"""Pure numpy implementations of the propagation kernels.

Same signatures and summation order as the compiled ``_ckernels`` module.
"""
import numpy as np


def normalized_csr(pairs, weights, num_nodes):
    """CSR arrays of D^-1/2 (A + I) D^-1/2 with unit self-loops.

    ``pairs`` must be sorted lexicographically, symmetric, and free of
    self-loops. Column indices in each row come out sorted.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64)
    n = int(num_nodes)
    rows = np.concatenate([pairs[:, 0], np.arange(n)])
    cols = np.concatenate([pairs[:, 1], np.arange(n)])
    vals = np.concatenate([weights, np.ones(n)])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]

    deg = np.bincount(pairs[:, 0], weights=weights, minlength=n) + 1.0
    dinv = 1.0 / np.sqrt(deg)
    data = dinv[rows] * vals * dinv[cols]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols.astype(np.int64), data


def csr_matmul(indptr, indices, data, x):
    """Dense ``A @ x`` for a CSR matrix."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((len(indptr) - 1, x.shape[1]))
    filled = np.diff(indptr) > 0
    if filled.any():
        contrib = data[:, None] * x[indices]
        # reduceat misreads empty segments, so only sum over non-empty rows
        out[filled] = np.add.reduceat(contrib, indptr[:-1][filled], axis=0)
    return out
