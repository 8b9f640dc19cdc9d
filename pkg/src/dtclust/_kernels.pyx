# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must stay result-compatible with ``_fallback.py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def tv1d(const double[::1] y, double lam):
    """Minimize 0.5*||x - y||^2 + lam * sum |x[i+1] - x[i]| exactly."""
    cdef Py_ssize_t n = y.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out_arr
    if n == 0:
        return out_arr
    if lam <= 0.0:
        x[:] = y
        return out_arr
    cdef Py_ssize_t k = 0, k0 = 0, kplus = 0, kminus = 0
    cdef double umin = lam, umax = -lam
    cdef double vmin = y[0] - lam, vmax = y[0] + lam
    cdef double twolam = 2.0 * lam, minlam = -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k0
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while k0 <= k:
                    x[k0] = vmin
                    k0 += 1
                return out_arr
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = k0
            kplus = k0
            kminus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin = lam
            umax = minlam
        else:
            umax += y[k + 1] - vmax
            if umax > lam:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k0
                kminus = k0
                vmax = y[k0]
                vmin = vmax - twolam
                umin = lam
                umax = minlam
            else:
                k += 1
                if umin >= lam:
                    kminus = k
                    vmin += (umin - lam) / (kminus - k0 + 1)
                    umin = lam
                if umax <= minlam:
                    kplus = k
                    vmax += (umax + lam) / (kplus - k0 + 1)
                    umax = minlam


cdef inline double _sqdist(const double[:, ::1] X, Py_ssize_t i,
                           double[:, ::1] C, Py_ssize_t c, Py_ssize_t p) nogil:
    cdef double s = 0.0, t
    cdef Py_ssize_t q
    for q in range(p):
        t = X[i, q] - C[c, q]
        s += t * t
    return s


def lloyd(const double[:, ::1] X, centers_init, int max_iter):
    """Lloyd iterations from given centers.

    Returns (labels, centers, history) where history[t] is the objective
    after the t-th center update.
    """
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1]
    centers_arr = np.array(centers_init, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] C = centers_arr
    cdef Py_ssize_t K = C.shape[0]
    labels_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] labels = labels_arr
    counts_arr = np.zeros(K, dtype=np.intp)
    cdef Py_ssize_t[::1] counts = counts_arr
    cdef double[:, ::1] sums = np.zeros((K, p), dtype=np.float64)
    cdef double[::1] hist = np.zeros(max(max_iter, 1), dtype=np.float64)
    cdef Py_ssize_t it, i, c, q, best, far, n_hist = 0
    cdef double d, bestd, fard, obj
    cdef bint changed

    for it in range(max_iter):
        changed = False
        for i in range(n):
            best = 0
            bestd = _sqdist(X, i, C, 0, p)
            for c in range(1, K):
                d = _sqdist(X, i, C, c, p)
                if d < bestd:
                    bestd = d
                    best = c
            if labels[i] != best:
                labels[i] = best
                changed = True
        if not changed:
            break

        for c in range(K):
            counts[c] = 0
            for q in range(p):
                sums[c, q] = 0.0
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            for q in range(p):
                sums[c, q] += X[i, q]
        for c in range(K):
            if counts[c] > 0:
                for q in range(p):
                    C[c, q] = sums[c, q] / counts[c]

        # empty-cluster repair: move the point farthest from its center
        for c in range(K):
            if counts[c] > 0:
                continue
            far = -1
            fard = -1.0
            for i in range(n):
                if counts[labels[i]] > 1:
                    d = _sqdist(X, i, C, labels[i], p)
                    if d > fard:
                        fard = d
                        far = i
            if far < 0:
                continue
            best = labels[far]
            counts[best] -= 1
            for q in range(p):
                sums[best, q] -= X[far, q]
                C[best, q] = sums[best, q] / counts[best]
                sums[c, q] = X[far, q]
                C[c, q] = X[far, q]
            counts[c] = 1
            labels[far] = c

        obj = 0.0
        for i in range(n):
            obj += _sqdist(X, i, C, labels[i], p)
        hist[n_hist] = obj
        n_hist += 1

    return labels_arr, centers_arr, np.asarray(hist[:n_hist]).copy()
