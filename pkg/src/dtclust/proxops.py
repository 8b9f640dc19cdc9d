"""Sparsity and fusion operators applied to factor vectors.

``fuse`` solves ``argmin_u sum (u_i - v_i)^2 + lam * sum |u_{i+1} - u_i|``.
There is no 1/2 on the quadratic term, so this is the total-variation
proximal map with weight ``lam / 2``.
"""
from __future__ import annotations

import numpy as np

from dtclust import _backend

EPS_ZERO = 1e-12


class DegenerateVector(ArithmeticError):
    """A vector too close to zero to be normalized."""


def tv_seminorm(v) -> float:
    """``||D v||_1``, the sum of absolute successive differences."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.abs(np.diff(v)).sum())


def truncate(v, tau: int) -> np.ndarray:
    """Keep the ``tau`` largest-magnitude entries of ``v`` and zero the rest.

    Ties at the threshold keep the lowest indices.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    tau = int(tau)
    if tau < 0 or tau > d:
        raise ValueError(f"tau={tau} outside [0, {d}]")
    if tau == d:
        return v.copy()
    out = np.zeros_like(v)
    if tau == 0:
        return out
    keep = np.argsort(-np.abs(v), kind="stable")[:tau]
    out[keep] = v[keep]
    return out


def fuse(v, lam: float) -> np.ndarray:
    """Exact 1-D fused-lasso smoothing of ``v``."""
    if lam < 0:
        raise ValueError(f"fusion weight must be nonnegative, got {lam}")
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape[0] == 0:
        raise ValueError("cannot fuse an empty vector")
    if lam == 0:
        return v.copy()
    if not np.isfinite(lam):
        return np.full_like(v, v.mean())
    return _backend.tv1d(v, 0.5 * lam)


def truncatefuse(v, tau: int, lam: float) -> np.ndarray:
    """``truncate(fuse(v, lam), tau)``: fusion first, then truncation."""
    return truncate(fuse(v, lam), tau)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    nrm = float(np.linalg.norm(v))
    if not nrm > EPS_ZERO:
        raise DegenerateVector(f"vector norm {nrm:.3g} is below {EPS_ZERO}")
    return v / nrm
