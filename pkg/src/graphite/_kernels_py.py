"""Numpy/scipy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np
import scipy.sparse as sp


def _csr(indptr, cols, w, n_cols):
    n_out = len(indptr) - 1
    return sp.csr_matrix((w, cols, indptr), shape=(n_out, n_cols))


def spmm(indptr, cols, w, h):
    return np.asarray(_csr(indptr, cols, w, h.shape[0]) @ h)


def spmm_backward(indptr, cols, w, h, gout):
    n_out = len(indptr) - 1
    rows = np.repeat(np.arange(n_out), np.diff(indptr))
    grad_w = np.einsum("ij,ij->i", gout[rows], h[cols])
    grad_h = np.asarray(_csr(indptr, cols, w, h.shape[0]).T @ gout)
    return grad_w, grad_h


def rows_intersect(indptr, indices, eu, ev):
    return (rows_dot(indptr, indices, np.ones(len(indices)), eu, ev) > 0).astype(np.uint8)


def rows_dot(indptr, indices, data, eu, ev):
    if len(eu) == 0:
        return np.zeros(0)
    n_cols = int(indices.max()) + 1 if len(indices) else 1
    m = sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, n_cols))
    return np.asarray(m[eu].multiply(m[ev]).sum(axis=1)).ravel().astype(np.float64)


def cooccurrence_pairs(x_indptr, x_indices, xt_indptr, xt_indices):
    n = len(x_indptr) - 1
    n_cols = len(xt_indptr) - 1
    x = sp.csr_matrix((np.ones(len(x_indices)), x_indices, x_indptr), shape=(n, n_cols))
    co = sp.triu(x @ x.T, k=1).tocoo()
    pairs = np.stack([co.row, co.col], axis=1).astype(np.int64)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]
