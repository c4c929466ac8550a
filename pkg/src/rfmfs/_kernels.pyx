# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batched disk-grid reductions; see _kernels_py for the contract."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

BACKEND = "compiled"


def tilted_logsums(const double[::1] lnw, const double[::1] a, const double[::1] b, const double[::1] c,
                   const double[::1] l, Py_ssize_t n_pos, coefs_in):
    coefs_arr = np.atleast_2d(np.asarray(coefs_in, dtype=np.float64))
    cdef double[:, ::1] coefs = np.ascontiguousarray(coefs_arr)
    cdef Py_ssize_t n_rows = coefs.shape[0]
    cdef Py_ssize_t n_nodes = lnw.shape[0]
    out_pos_arr = np.empty(n_rows)
    out_neg_arr = np.empty(n_rows)
    cdef double[::1] out_pos = out_pos_arr
    cdef double[::1] out_neg = out_neg_arr
    scratch_arr = np.empty(n_nodes)
    cdef double[::1] g = scratch_arr
    cdef Py_ssize_t i, j
    cdef double ca, cb, cc, cl, mp, mn, sp, sn, v
    with nogil:
        for i in range(n_rows):
            ca = coefs[i, 0]; cb = coefs[i, 1]; cc = coefs[i, 2]; cl = coefs[i, 3]
            mp = -INFINITY
            mn = -INFINITY
            for j in range(n_nodes):
                v = ca * a[j] + cb * b[j] + cc * c[j] + cl * l[j] + lnw[j]
                g[j] = v
                if j < n_pos:
                    if v > mp:
                        mp = v
                else:
                    if v > mn:
                        mn = v
            sp = 0.0
            sn = 0.0
            if mp > -INFINITY:
                for j in range(n_pos):
                    sp += exp(g[j] - mp)
                out_pos[i] = mp + log(sp)
            else:
                out_pos[i] = -INFINITY
            if mn > -INFINITY:
                for j in range(n_pos, n_nodes):
                    sn += exp(g[j] - mn)
                out_neg[i] = mn + log(sn)
            else:
                out_neg[i] = -INFINITY
    return out_pos_arr, out_neg_arr


def tilted_xmean(const double[::1] lnw, const double[::1] a, const double[::1] b, const double[::1] c,
                 const double[::1] l, const double[::1] xs, coefs_in):
    coefs_arr = np.atleast_2d(np.asarray(coefs_in, dtype=np.float64))
    cdef double[:, ::1] coefs = np.ascontiguousarray(coefs_arr)
    cdef Py_ssize_t n_rows = coefs.shape[0]
    cdef Py_ssize_t n_nodes = lnw.shape[0]
    logz_arr = np.empty(n_rows)
    xmean_arr = np.empty(n_rows)
    cdef double[::1] logz = logz_arr
    cdef double[::1] xmean = xmean_arr
    scratch_arr = np.empty(n_nodes)
    cdef double[::1] g = scratch_arr
    cdef Py_ssize_t i, j
    cdef double ca, cb, cc, cl, m, s, sx, e, v
    with nogil:
        for i in range(n_rows):
            ca = coefs[i, 0]; cb = coefs[i, 1]; cc = coefs[i, 2]; cl = coefs[i, 3]
            m = -INFINITY
            for j in range(n_nodes):
                v = ca * a[j] + cb * b[j] + cc * c[j] + cl * l[j] + lnw[j]
                g[j] = v
                if v > m:
                    m = v
            s = 0.0
            sx = 0.0
            for j in range(n_nodes):
                e = exp(g[j] - m)
                s += e
                sx += e * xs[j]
            logz[i] = m + log(s)
            xmean[i] = sx / s
    return logz_arr, xmean_arr
