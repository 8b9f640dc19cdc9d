"""Independent reference implementations used by the tests.

Nothing here calls into the package's solvers.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy.optimize import lsq_linear


def fused_objective(u, v, lam):
    return float(np.sum((u - v) ** 2) + lam * np.sum(np.abs(np.diff(u))))


@lru_cache(maxsize=None)
def _patterns(d):
    # every assignment of {-1, 0, +1} to the d-1 successive differences
    P = np.array(list(itertools.product((-1, 0, 1), repeat=d - 1)), dtype=np.int8)
    P = P.reshape(-1, d - 1)
    bid = np.zeros((P.shape[0], d), dtype=np.intp)
    bid[:, 1:] = np.cumsum(P != 0, axis=1)
    return P, bid


def fuse_enum_oracle(v, lam):
    """Minimize ``sum (u-v)^2 + lam*TV(u)`` by enumerating difference patterns.

    For a fixed pattern (which differences are zero, and the signs of the
    others) the objective is a smooth quadratic in the block values, with
    the closed-form minimizer ``(block sum + sign adjustments) / block size``.
    The global minimizer is the candidate with the least true objective.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    if d == 1 or lam == 0:
        return v.copy()
    P, bid = _patterns(d)
    n_pat = P.shape[0]
    flat = (bid + d * np.arange(n_pat)[:, None]).ravel()
    sums = np.bincount(flat, weights=np.tile(v, n_pat), minlength=n_pat * d)
    cnt = np.bincount(flat, minlength=n_pat * d).astype(np.float64)
    adj = np.zeros(n_pat * d)
    half = 0.5 * lam * P.astype(np.float64)
    left = (bid[:, :-1] + d * np.arange(n_pat)[:, None]).ravel()
    right = (bid[:, 1:] + d * np.arange(n_pat)[:, None]).ravel()
    np.add.at(adj, left, half.ravel())
    np.add.at(adj, right, -half.ravel())
    vals = np.divide(sums + adj, cnt, out=np.zeros_like(sums), where=cnt > 0)
    U = vals[flat].reshape(n_pat, d)
    obj = np.sum((U - v) ** 2, axis=1) + lam * np.sum(np.abs(np.diff(U, axis=1)), axis=1)
    return U[int(np.argmin(obj))].copy()


def fuse_qp_oracle(v, lam):
    """Same problem through its dual box-constrained least squares.

    ``u = v - D^T z`` with ``z`` minimizing ``||v - D^T z||^2`` over
    ``|z_i| <= lam / 2``.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    if d == 1 or lam == 0:
        return v.copy()
    D = np.diff(np.eye(d), axis=0)
    b = lam / 2.0
    if not b > 0:  # subnormal lam: the box is a single point
        return v.copy()
    sol = lsq_linear(D.T, v, bounds=(-b, b), method="bvls", tol=1e-14, lsmr_tol="auto")
    return v - D.T @ sol.x


def pair_error_bruteforce(a, b):
    """Clustering error by explicit loops over unordered pairs."""
    n = len(a)
    bad = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1
            if (a[i] == a[j]) != (b[i] == b[j]):
                bad += 1
    return bad / total


def same_partition(a, b):
    """True when two label vectors induce the same partition (by canonical relabeling)."""
    def canon(x):
        seen = {}
        return tuple(seen.setdefault(v, len(seen)) for v in x)
    return canon(a) == canon(b)


def kron_all(mats):
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(out, M)
    return out
