"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built, or when ``DTCLUST_PURE_PYTHON=1``.
"""
import numpy as np


def tv1d(y, lam):
    """Minimize ``0.5*||x - y||^2 + lam * sum |x[i+1] - x[i]|`` exactly.

    Direct (taut-string type) algorithm of Condat; linear in practice.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    if n == 0:
        return np.empty(0)
    if lam <= 0.0:
        return y.copy()
    yl = y.tolist()
    x = [0.0] * n
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = yl[0] - lam, yl[0] + lam
    twolam, minlam = 2.0 * lam, -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = yl[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = yl[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while k0 <= k:
                    x[k0] = vmin
                    k0 += 1
                return np.array(x)
        umin += yl[k + 1] - vmin
        if umin < minlam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kplus = kminus = k0
            vmin = yl[k0]
            vmax = vmin + twolam
            umin, umax = lam, minlam
        else:
            umax += yl[k + 1] - vmax
            if umax > lam:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = kminus = k0
                vmax = yl[k0]
                vmin = vmax - twolam
                umin, umax = lam, minlam
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


def _sqdist(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkp,nkp->nk", diff, diff)


def lloyd(X, centers_init, max_iter):
    """Lloyd iterations from given centers; see ``_kernels.lloyd``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.array(centers_init, dtype=np.float64, copy=True)
    n = X.shape[0]
    K = C.shape[0]
    labels = np.full(n, -1, dtype=np.intp)
    hist = []
    for _ in range(max_iter):
        new = np.argmin(_sqdist(X, C), axis=1).astype(np.intp)
        if np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=K)
        for c in range(K):
            if counts[c] > 0:
                C[c] = X[labels == c].sum(axis=0) / counts[c]
        for c in range(K):
            if counts[c] > 0:
                continue
            own = np.sum((X - C[labels]) ** 2, axis=1)
            own[counts[labels] <= 1] = -np.inf
            far = int(np.argmax(own))
            if not np.isfinite(own[far]):
                continue
            src = labels[far]
            counts[src] -= 1
            labels[far] = c
            counts[c] = 1
            C[src] = X[labels == src].sum(axis=0) / counts[src]
            C[c] = X[far]
        hist.append(float(np.sum((X - C[labels]) ** 2)))
    return labels, C, np.array(hist)
