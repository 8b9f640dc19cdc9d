"""Clustering on the reduced factor matrix, plus the evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dtclust import _backend
from dtclust.stf import ConstraintSpec, stf_decompose
from dtclust.tensor import DenseTensor, FactorSet, _cp_array, stack_samples

W_FLOOR = 1e-300


@dataclass
class ClusteringResult:
    """K-means output.

    Attributes
    ----------
    assignment : ndarray of int, labels in ``1..K``
    centers : ndarray, shape (K, p)
    K : int
    within_dispersion : float
        Pooled within-cluster sum of squared distances.
    history : ndarray
        Objective after each Lloyd update of the winning run.
    """

    assignment: np.ndarray
    centers: np.ndarray
    K: int
    within_dispersion: float
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _kmeanspp(X, K, rng):
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), idx)
            nxt = int(rng.choice(rest))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[idx].copy()


def _relabel(labels, centers):
    # labels numbered by first appearance, starting at 1
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    remap = np.empty(centers.shape[0], dtype=np.intp)
    remap[order] = np.arange(order.shape[0])
    missing = np.setdiff1d(np.arange(centers.shape[0]), order)
    remap[missing] = np.arange(order.shape[0], centers.shape[0])
    new_centers = np.empty_like(centers)
    new_centers[remap] = centers
    return remap[labels] + 1, new_centers


def kmeans(X, K: int, n_init: int = 10, max_iter: int = 100, seed=0) -> ClusteringResult:
    """Best of ``n_init`` Lloyd runs from k-means++ seeds."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    K = int(K)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of points {n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        init = _kmeanspp(X, K, rng)
        labels, centers, hist = _backend.lloyd(X, init, max_iter)
        obj = float(np.sum((X - centers[labels]) ** 2))
        if best is None or obj < best[0]:
            best = (obj, labels, centers, hist)
    obj, labels, centers, hist = best
    labels, centers = _relabel(np.asarray(labels), np.asarray(centers))
    return ClusteringResult(labels, centers, K, obj, np.asarray(hist))


def _pairs_within(codes, rows, n_codes, n_rows):
    counts = np.bincount(rows * n_codes + codes, minlength=n_rows * n_codes)
    return (counts * (counts - 1) // 2).reshape(n_rows, n_codes).sum(axis=1)


def clustering_error(est, truth):
    """Fraction of sample pairs whose co-membership differs between partitions.

    Counts come from the contingency table: with ``S_a`` and ``S_b`` the
    numbers of same-cluster pairs in each partition and ``S_ab`` those
    shared by both, the disagreements are ``S_a + S_b - 2 S_ab``.

    ``est`` and ``truth`` may also be stacks of label vectors (last axis
    indexes samples); they broadcast against each other and an array of
    errors is returned.
    """
    a = np.asarray(est)
    b = np.asarray(truth)
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[-1]:
        raise ValueError(f"assignments differ in length: {a.shape} vs {b.shape}")
    n = a.shape[-1]
    if n < 2:
        raise ValueError("need at least two samples")
    a, b = np.broadcast_arrays(a, b)
    batch = a.shape[:-1]
    n_rows = int(np.prod(batch))
    _, ca = np.unique(a, return_inverse=True)
    _, cb = np.unique(b, return_inverse=True)
    ca = ca.reshape(-1)
    cb = cb.reshape(-1)
    la, lb = int(ca.max()) + 1, int(cb.max()) + 1
    rows = np.repeat(np.arange(n_rows), n)
    s_a = _pairs_within(ca, rows, la, n_rows)
    s_b = _pairs_within(cb, rows, lb, n_rows)
    _, joint = np.unique(ca * lb + cb, return_inverse=True)
    s_ab = _pairs_within(joint.reshape(-1), rows, int(joint.max()) + 1, n_rows)
    err = (s_a + s_b - 2 * s_ab) / (n * (n - 1) / 2)
    return float(err[0]) if not batch else err.reshape(batch)


def recovery_error(est: FactorSet, truth: FactorSet, dims: Sequence[int] | None = None) -> float:
    """Relative Frobenius distance between two CP reconstructions."""
    if est.dims != truth.dims or (dims is not None and tuple(dims) != truth.dims):
        raise ValueError(f"dimension mismatch: {est.dims} vs {truth.dims}")
    t = _cp_array(truth.weights, truth.factors)
    denom = float(np.linalg.norm(t.reshape(-1)))
    if denom == 0.0:
        raise ValueError("true factorization reconstructs to the zero tensor")
    diff = _cp_array(est.weights, est.factors) - t
    return float(np.linalg.norm(diff.reshape(-1))) / denom


def dtc(samples, K: int, R: int, spec: ConstraintSpec | None = None, mode: int = -1,
        kmeans_opts: dict | None = None):
    """Stack samples, factorize, and run K-means on one mode's factor matrix.

    ``samples`` is a list of equally shaped tensors, or an already stacked
    :class:`DenseTensor` whose last mode indexes samples. ``mode`` picks the
    factor matrix to cluster (default: the sample mode).
    """
    spec = spec or ConstraintSpec()
    T = samples if isinstance(samples, DenseTensor) else stack_samples(samples)
    F, _ = stf_decompose(T, R, spec)
    B = F.factors[mode]
    opts = {"seed": spec.rng_seed}
    opts.update(kmeans_opts or {})
    return kmeans(B, K, **opts), F


def _log_w(W):
    return np.log(np.maximum(W, W_FLOOR))


def gap_statistic(X, K_max: int, B: int = 50, seed=0, kmeans_opts: dict | None = None):
    """Gap statistic with a uniform bounding-box reference.

    Returns
    -------
    k : int
        Smallest k with ``gap(k) >= gap(k+1) - se(k+1)``, else ``K_max``.
    gaps, ses : ndarray of length K_max
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= K_max <= n:
        raise ValueError(f"K_max={K_max} must lie in [1, {n}]")
    if B < 1:
        raise ValueError("B must be >= 1")
    opts = {"n_init": 10, "max_iter": 100}
    opts.update(kmeans_opts or {})
    rng = np.random.default_rng(seed)
    lo, hi = X.min(axis=0), X.max(axis=0)
    refs = [lo + (hi - lo) * rng.random(X.shape) for _ in range(B)]
    km_seeds = rng.integers(0, 2**63 - 1, size=(K_max, B + 1))
    gaps = np.zeros(K_max)
    ses = np.zeros(K_max)
    for k in range(1, K_max + 1):
        w = kmeans(X, k, seed=int(km_seeds[k - 1, 0]), **opts).within_dispersion
        ref_logs = np.array([
            _log_w(kmeans(R, k, seed=int(km_seeds[k - 1, b + 1]), **opts).within_dispersion)
            for b, R in enumerate(refs)
        ])
        gaps[k - 1] = ref_logs.mean() - _log_w(w)
        ses[k - 1] = ref_logs.std() * np.sqrt(1.0 + 1.0 / B)
    return gap_choice(gaps, ses), gaps, ses


def gap_choice(gaps, ses) -> int:
    """Smallest k (1-based) with ``gap(k) >= gap(k+1) - se(k+1)``, else the last k."""
    gaps = np.asarray(gaps, dtype=np.float64)
    ses = np.asarray(ses, dtype=np.float64)
    for k in range(1, gaps.shape[0]):
        if gaps[k - 1] >= gaps[k] - ses[k]:
            return k
    return int(gaps.shape[0])
