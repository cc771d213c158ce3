# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the training inner loop.

Mirrors `_fallback.py` function for function. Single-pass loops avoid the
temporary arrays the NumPy versions allocate; matmul stays with BLAS in
both backends.
"""

import numpy as np

from libc.math cimport exp, fabs, log, sqrt, INFINITY


def relu_fwd(x):
    cdef object flat = np.ascontiguousarray(x).ravel()
    cdef object out = np.empty_like(flat)
    cdef double[::1] xv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i, size = xv.shape[0]
    for i in range(size):
        ov[i] = xv[i] if xv[i] > 0.0 else 0.0
    return out.reshape(np.shape(x))


def relu_bwd(x, g):
    cdef object xf = np.ascontiguousarray(x).ravel()
    cdef object gf = np.ascontiguousarray(g).ravel()
    cdef object out = np.empty_like(gf)
    cdef double[::1] xv = xf
    cdef double[::1] gv = gf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, size = xv.shape[0]
    for i in range(size):
        ov[i] = gv[i] if xv[i] > 0.0 else 0.0
    return out.reshape(np.shape(x))


def softmax_rows(z):
    """Row softmax; -inf entries map to exactly 0.

    Caller guarantees every row has at least one finite entry.
    """
    cdef object zc = np.ascontiguousarray(z)
    cdef object out = np.empty_like(zc)
    cdef double[:, ::1] zv = zc
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, n = zv.shape[0], m = zv.shape[1]
    cdef double mx, s, e
    for i in range(n):
        mx = -INFINITY
        for j in range(m):
            if zv[i, j] > mx:
                mx = zv[i, j]
        s = 0.0
        for j in range(m):
            if zv[i, j] == -INFINITY:
                ov[i, j] = 0.0
            else:
                e = exp(zv[i, j] - mx)
                ov[i, j] = e
                s += e
        for j in range(m):
            ov[i, j] /= s
    return out


def softmax_bwd_rows(p, g):
    cdef object pc = np.ascontiguousarray(p)
    cdef object gc = np.ascontiguousarray(g)
    cdef object out = np.empty_like(pc)
    cdef double[:, ::1] pv = pc
    cdef double[:, ::1] gv = gc
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, n = pv.shape[0], m = pv.shape[1]
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(m):
            dot += gv[i, j] * pv[i, j]
        for j in range(m):
            ov[i, j] = pv[i, j] * (gv[i, j] - dot)
    return out


def logsumexp_rows(z):
    cdef object zc = np.ascontiguousarray(z)
    cdef double[:, ::1] zv = zc
    cdef Py_ssize_t i, j, n = zv.shape[0], m = zv.shape[1]
    cdef object out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double mx, s
    for i in range(n):
        mx = -INFINITY
        for j in range(m):
            if zv[i, j] > mx:
                mx = zv[i, j]
        s = 0.0
        for j in range(m):
            s += exp(zv[i, j] - mx)
        ov[i] = mx + log(s)
    return out


def abs_sum(d):
    cdef object df = np.ascontiguousarray(d).ravel()
    cdef double[::1] dv = df
    cdef Py_ssize_t i, size = dv.shape[0]
    cdef double s = 0.0
    for i in range(size):
        s += fabs(dv[i])
    return s


def sign(d):
    cdef object df = np.ascontiguousarray(d).ravel()
    cdef object out = np.empty_like(df)
    cdef double[::1] dv = df
    cdef double[::1] ov = out
    cdef Py_ssize_t i, size = dv.shape[0]
    for i in range(size):
        if dv[i] > 0.0:
            ov[i] = 1.0
        elif dv[i] < 0.0:
            ov[i] = -1.0
        else:
            ov[i] = 0.0
    return out.reshape(np.shape(d))


def huber_each(d, double delta):
    cdef object df = np.ascontiguousarray(d).ravel()
    cdef object out = np.empty_like(df)
    cdef double[::1] dv = df
    cdef double[::1] ov = out
    cdef Py_ssize_t i, size = dv.shape[0]
    cdef double a
    for i in range(size):
        a = fabs(dv[i])
        if a <= delta:
            ov[i] = 0.5 * dv[i] * dv[i]
        else:
            ov[i] = delta * (a - 0.5 * delta)
    return out.reshape(np.shape(d))


def huber_grad(d, double delta):
    cdef object df = np.ascontiguousarray(d).ravel()
    cdef object out = np.empty_like(df)
    cdef double[::1] dv = df
    cdef double[::1] ov = out
    cdef Py_ssize_t i, size = dv.shape[0]
    for i in range(size):
        if fabs(dv[i]) <= delta:
            ov[i] = dv[i]
        elif dv[i] > 0.0:
            ov[i] = delta
        else:
            ov[i] = -delta
    return out.reshape(np.shape(d))


def pairwise_mean_dist(x):
    """psi[i] = mean_{j != i} ||x_i - x_j||_2 for a (N, k) matrix."""
    cdef object xc = np.ascontiguousarray(x)
    cdef double[:, ::1] xv = xc
    cdef Py_ssize_t i, j, c, n = xv.shape[0], k = xv.shape[1]
    cdef object out = np.zeros(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double s, diff, d
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for c in range(k):
                diff = xv[i, c] - xv[j, c]
                s += diff * diff
            d = sqrt(s)
            ov[i] += d
            ov[j] += d
    for i in range(n):
        ov[i] /= n - 1
    return out


def pairwise_mean_dist_bwd(x, gpsi):
    """Gradient of sum_i gpsi[i] * psi[i] w.r.t. x.

    Uses the subgradient 0 for coincident rows (distance 0).
    """
    cdef object xc = np.ascontiguousarray(x)
    cdef object gc = np.ascontiguousarray(gpsi)
    cdef double[:, ::1] xv = xc
    cdef double[::1] gv = gc
    cdef Py_ssize_t i, j, c, n = xv.shape[0], k = xv.shape[1]
    cdef object out = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double s, diff, d, w, scale = 1.0 / (n - 1)
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for c in range(k):
                diff = xv[i, c] - xv[j, c]
                s += diff * diff
            d = sqrt(s)
            if d == 0.0:
                continue
            w = (gv[i] + gv[j]) * scale / d
            for c in range(k):
                diff = xv[i, c] - xv[j, c]
                ov[i, c] += w * diff
                ov[j, c] -= w * diff
    return out
