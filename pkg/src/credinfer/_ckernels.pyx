# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused kernels.

Same signatures and results as ``_pykernels``. Loops run in the same
element order as the numpy fallback so sums accumulate identically.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def gdu_mix(const double[:, ::1] g, const double[:, ::1] r,
            const double[:, ::1] a, const double[:, ::1] b,
            const double[:, ::1] c, const double[:, ::1] d):
    cdef Py_ssize_t n = g.shape[0], m = g.shape[1], i, j
    cdef double gv, p, q
    out = np.empty((n, m))
    cdef double[:, ::1] h = out
    with nogil:
        for i in range(n):
            for j in range(m):
                gv = g[i, j]
                p = b[i, j] + gv * (a[i, j] - b[i, j])
                q = d[i, j] + gv * (c[i, j] - d[i, j])
                h[i, j] = q + r[i, j] * (p - q)
    return out


def gdu_mix_grad(const double[:, ::1] g, const double[:, ::1] r,
                 const double[:, ::1] a, const double[:, ::1] b,
                 const double[:, ::1] c, const double[:, ::1] d,
                 const double[:, ::1] gh):
    cdef Py_ssize_t n = g.shape[0], m = g.shape[1], i, j
    cdef double gv, rv, ng, nr, w, p, q
    outs = [np.empty((n, m)) for _ in range(6)]
    cdef double[:, ::1] dg = outs[0], dr = outs[1], da = outs[2]
    cdef double[:, ::1] db = outs[3], dc = outs[4], dd = outs[5]
    with nogil:
        for i in range(n):
            for j in range(m):
                gv = g[i, j]
                rv = r[i, j]
                ng = 1.0 - gv
                nr = 1.0 - rv
                w = gh[i, j]
                dg[i, j] = w * (rv * (a[i, j] - b[i, j]) + nr * (c[i, j] - d[i, j]))
                p = b[i, j] + gv * (a[i, j] - b[i, j])
                q = d[i, j] + gv * (c[i, j] - d[i, j])
                dr[i, j] = w * (p - q)
                da[i, j] = w * gv * rv
                db[i, j] = w * ng * rv
                dc[i, j] = w * gv * nr
                dd[i, j] = w * ng * nr
    return tuple(outs)


def segment_mean(const double[:, ::1] values, const cnp.int64_t[::1] indptr,
                 const cnp.int64_t[::1] indices):
    cdef Py_ssize_t n_seg = indptr.shape[0] - 1, m = values.shape[1]
    cdef Py_ssize_t s, k, j, row, cnt
    out = np.zeros((n_seg, m))
    cdef double[:, ::1] o = out
    with nogil:
        for s in range(n_seg):
            cnt = indptr[s + 1] - indptr[s]
            if cnt == 0:
                continue
            for k in range(indptr[s], indptr[s + 1]):
                row = indices[k]
                for j in range(m):
                    o[s, j] += values[row, j]
            for j in range(m):
                o[s, j] /= cnt
    return out


def segment_mean_grad(const double[:, ::1] grad_out, const cnp.int64_t[::1] indptr,
                      const cnp.int64_t[::1] indices, Py_ssize_t n_values):
    cdef Py_ssize_t n_seg = indptr.shape[0] - 1, m = grad_out.shape[1]
    cdef Py_ssize_t s, k, j, row, cnt
    cdef double w
    out = np.zeros((n_values, m))
    cdef double[:, ::1] o = out
    with nogil:
        for s in range(n_seg):
            cnt = indptr[s + 1] - indptr[s]
            for k in range(indptr[s], indptr[s + 1]):
                row = indices[k]
                for j in range(m):
                    w = grad_out[s, j] / cnt
                    o[row, j] += w
    return out


def scatter_add_rows(Py_ssize_t n_rows, const cnp.int64_t[::1] idx,
                     const double[:, ::1] src):
    cdef Py_ssize_t n = idx.shape[0], m = src.shape[1], i, j, row
    out = np.zeros((n_rows, m))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            row = idx[i]
            for j in range(m):
                o[row, j] += src[i, j]
    return out
