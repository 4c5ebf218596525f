# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for sparse message passing and feature-set scans.

Every function mirrors one in ``graphite._kernels_py`` and must return the
same values. Index arrays are int64, value arrays float64, all C-contiguous.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t


def spmm(const idx_t[::1] indptr, const idx_t[::1] cols,
         const double[::1] w, const double[:, ::1] h):
    cdef Py_ssize_t n_out = indptr.shape[0] - 1
    cdef Py_ssize_t m = h.shape[1]
    out_arr = np.zeros((n_out, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, e, j, c
    cdef double we
    for r in range(n_out):
        for e in range(indptr[r], indptr[r + 1]):
            we = w[e]
            c = cols[e]
            for j in range(m):
                out[r, j] += we * h[c, j]
    return out_arr


def spmm_backward(const idx_t[::1] indptr, const idx_t[::1] cols,
                  const double[::1] w, const double[:, ::1] h,
                  const double[:, ::1] gout):
    cdef Py_ssize_t n_out = indptr.shape[0] - 1
    cdef Py_ssize_t m = h.shape[1]
    grad_w_arr = np.zeros(cols.shape[0], dtype=np.float64)
    grad_h_arr = np.zeros((h.shape[0], m), dtype=np.float64)
    cdef double[::1] grad_w = grad_w_arr
    cdef double[:, ::1] grad_h = grad_h_arr
    cdef Py_ssize_t r, e, j, c
    cdef double acc, we, g
    for r in range(n_out):
        for e in range(indptr[r], indptr[r + 1]):
            c = cols[e]
            we = w[e]
            acc = 0.0
            for j in range(m):
                g = gout[r, j]
                acc += g * h[c, j]
                grad_h[c, j] += we * g
            grad_w[e] = acc
    return grad_w_arr, grad_h_arr


def rows_intersect(const idx_t[::1] indptr, const idx_t[::1] indices,
                   const idx_t[::1] eu, const idx_t[::1] ev):
    cdef Py_ssize_t n = eu.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef Py_ssize_t i, a, a_end, b, b_end
    cdef idx_t x, y
    for i in range(n):
        a = indptr[eu[i]]
        a_end = indptr[eu[i] + 1]
        b = indptr[ev[i]]
        b_end = indptr[ev[i] + 1]
        while a < a_end and b < b_end:
            x = indices[a]
            y = indices[b]
            if x == y:
                out[i] = 1
                break
            elif x < y:
                a += 1
            else:
                b += 1
    return out_arr


def rows_dot(const idx_t[::1] indptr, const idx_t[::1] indices,
             const double[::1] data, const idx_t[::1] eu, const idx_t[::1] ev):
    cdef Py_ssize_t n = eu.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, a, a_end, b, b_end
    cdef idx_t x, y
    cdef double acc
    for i in range(n):
        a = indptr[eu[i]]
        a_end = indptr[eu[i] + 1]
        b = indptr[ev[i]]
        b_end = indptr[ev[i] + 1]
        acc = 0.0
        while a < a_end and b < b_end:
            x = indices[a]
            y = indices[b]
            if x == y:
                acc += data[a] * data[b]
                a += 1
                b += 1
            elif x < y:
                a += 1
            else:
                b += 1
        out[i] = acc
    return out_arr


def cooccurrence_pairs(const idx_t[::1] x_indptr, const idx_t[::1] x_indices,
                       const idx_t[::1] xt_indptr, const idx_t[::1] xt_indices):
    """All pairs u < v whose feature rows share a column, sorted by (u, v)."""
    cdef Py_ssize_t n = x_indptr.shape[0] - 1
    mark_arr = np.full(n, -1, dtype=np.int64)
    cdef idx_t[::1] mark = mark_arr
    buf_arr = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] buf = buf_arr
    chunks = []
    cdef Py_ssize_t u, a, k, b, cnt
    cdef idx_t v
    for u in range(n):
        cnt = 0
        for a in range(x_indptr[u], x_indptr[u + 1]):
            k = x_indices[a]
            for b in range(xt_indptr[k], xt_indptr[k + 1]):
                v = xt_indices[b]
                if v > u and mark[v] != u:
                    mark[v] = u
                    buf[cnt] = v
                    cnt += 1
        if cnt:
            vs = np.sort(buf_arr[:cnt])
            pair = np.empty((cnt, 2), dtype=np.int64)
            pair[:, 0] = u
            pair[:, 1] = vs
            chunks.append(pair)
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(chunks)
