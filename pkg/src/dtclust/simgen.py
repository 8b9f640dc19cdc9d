"""Synthetic tensor clustering designs with known CP structure.

Both designs have four clusters laid out in sample order and a rank-2
signal. The sample-mode components carry the cluster signs

    cluster:   1   2   3   4
    rank 1:    +   +   -   -
    rank 2:    -   +   +   -

so the four cluster centers in the reduced space sit at the corners of a
square.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dtclust.tensor import DenseTensor, FactorSet, _cp_array

_SIGNS = np.array([[1.0, 1.0, -1.0, -1.0], [-1.0, 1.0, 1.0, -1.0]])


@dataclass(frozen=True)
class CovarianceSpec:
    kind: str = "identity"
    rho: float = 0.0
    d: int = 1

    def __post_init__(self):
        if self.kind not in ("identity", "ar", "exchangeable"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.d < 1:
            raise ValueError("covariance dimension must be >= 1")


@dataclass
class SimDataset:
    samples: list[DenseTensor]
    truth_factors: FactorSet
    truth_assignment: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return int(self.truth_assignment.max())

    def stacked(self) -> DenseTensor:
        from dtclust.tensor import stack_samples

        return stack_samples(self.samples)


def make_cov(spec: CovarianceSpec) -> np.ndarray:
    """AR(1): ``rho**|i-j|``; exchangeable: ``rho`` off the diagonal."""
    d, rho = spec.d, spec.rho
    if spec.kind == "identity":
        return np.eye(d)
    if spec.kind == "ar":
        idx = np.arange(d)
        return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    cov = np.full((d, d), rho)
    np.fill_diagonal(cov, 1.0)
    return cov


def _cov_factor(c, d):
    if c is None:
        return None
    if isinstance(c, CovarianceSpec):
        if c.kind == "identity":
            return None
        if c.d != d:
            raise ValueError(f"covariance dimension {c.d} does not match mode size {d}")
        c = make_cov(c)
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (d, d):
        raise ValueError(f"covariance shape {c.shape} does not match mode size {d}")
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance matrix is not positive definite") from exc


def _apply_mode(arr, L, j):
    # X = Z x_j L: mix entries along mode j
    return np.moveaxis(np.tensordot(L, arr, axes=([1], [j])), 0, j)


def _colored_noise(rng, dims, covs):
    Z = rng.standard_normal(dims)
    for j, c in enumerate(covs):
        L = _cov_factor(c, dims[j])
        if L is not None:
            Z = _apply_mode(Z, L, j)
    return Z


def sample_tensor_normal(M, covs: Sequence, seed=None) -> DenseTensor:
    """Draw ``X`` with ``vec(X) ~ N(vec(M), Sigma_m kron ... kron Sigma_1)``.

    ``vec`` here stacks with the first index fastest (column-major). Each
    entry of ``covs`` is a :class:`CovarianceSpec`, a matrix, or ``None``
    for the identity.
    """
    mean = np.asarray(M, dtype=np.float64)
    if len(covs) != mean.ndim:
        raise ValueError(f"need {mean.ndim} covariances, got {len(covs)}")
    rng = np.random.default_rng(seed)
    return DenseTensor._wrap(mean + _colored_noise(rng, mean.shape, covs))


def cluster_sizes(N: int, ratios: Sequence[float] | None = None, K: int = 4) -> np.ndarray:
    """Cluster sizes from cumulative floors of ``N * cumsum(ratios) / sum(ratios)``.

    Equal ratios give the boundaries floor(N/4), floor(N/2), floor(3N/4);
    the rounding remainder lands in the last cluster.
    """
    r = np.ones(K) if ratios is None else np.asarray(ratios, dtype=np.float64)
    if r.ndim != 1 or np.any(r <= 0):
        raise ValueError("cluster ratios must be positive")
    cuts = np.floor(N * np.cumsum(r)[:-1] / r.sum() + 1e-9).astype(int)
    bounds = np.concatenate([[0], cuts, [N]])
    sizes = np.diff(bounds)
    if np.any(sizes < 1):
        raise ValueError(f"N={N} too small for cluster ratios {r.tolist()}")
    return sizes


def _sample_components(sizes, mu, n_rank):
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    comps = []
    for r in range(n_rank):
        comps.append(mu * _SIGNS[r % 2][labels - 1])
    return labels, comps


def _build(feature_comps, sample_comps, labels, noise, meta):
    # feature_comps[r] is a list of unnormalized vectors for modes 1..m
    R = len(sample_comps)
    modes = [list(fc) + [sc] for fc, sc in zip(feature_comps, sample_comps)]
    m1 = len(modes[0])
    weights = np.array([np.prod([np.linalg.norm(v) for v in modes[r]]) for r in range(R)])
    factors = [np.column_stack([modes[r][j] / np.linalg.norm(modes[r][j]) for r in range(R)])
               for j in range(m1)]
    truth = FactorSet(weights, factors)
    signal = _cp_array(truth.weights, truth.factors)
    data = signal + noise
    samples = [DenseTensor._wrap(data[..., i].copy()) for i in range(data.shape[-1])]
    return SimDataset(samples, truth, labels, meta)


def gen_2d(N: int, d1: int, mu: float, cov: CovarianceSpec | None = None,
           cluster_ratios: Sequence[float] | None = None, seed=0, rank: int = 2) -> SimDataset:
    """Matrix samples (d1 x d1) from four clusters around a rank-``rank`` CP mean.

    Feature components of rank r carry ``(mu, -mu, mu/2, -mu/2)`` starting
    at row ``4*(r-1)``. Ranks beyond 2 wrap the support around and reuse
    the two sample-mode sign patterns alternately.
    """
    if d1 < 8:
        raise ValueError(f"d1={d1} is too small; the design needs d1 >= 8")
    if N < 4:
        raise ValueError("need at least 4 samples")
    if rank < 1:
        raise ValueError("rank must be >= 1")
    sizes = cluster_sizes(N, cluster_ratios)
    labels, sample_comps = _sample_components(sizes, mu, rank)
    block = mu * np.array([1.0, -1.0, 0.5, -0.5])
    feature_comps = []
    for r in range(rank):
        v = np.zeros(d1)
        v[(4 * r + np.arange(4)) % d1] = block
        feature_comps.append([v, v.copy()])
    cov = cov or CovarianceSpec("identity", 0.0, d1)
    if cov.kind != "identity" and cov.d != d1:
        cov = CovarianceSpec(cov.kind, cov.rho, d1)
    rng = np.random.default_rng(seed)
    noise = _colored_noise(rng, (d1, d1, N), [cov, cov, None])
    meta = {"design": "2d", "N": N, "d": d1, "mu": mu, "cov": cov.kind, "rho": cov.rho,
            "cluster_sizes": sizes.tolist(), "rank": rank, "seed": seed}
    return _build(feature_comps, sample_comps, labels, noise, meta)


def gen_3d(N: int, d: int, mu: float, cluster_ratios: Sequence[float] | None = None,
           seed=0) -> SimDataset:
    """Three-way samples (d x d x d) from four clusters around a rank-2 CP mean.

    For d = 20 the feature components are ``(mu x5, -mu x5, 0 x10)`` and
    ``(0 x10, mu x5, -mu x5)``; other d use blocks of ``d // 4``.
    """
    if d < 4:
        raise ValueError(f"d={d} is too small; the design needs d >= 4")
    if N < 4:
        raise ValueError("need at least 4 samples")
    q = d // 4
    a = np.zeros(d)
    a[:q], a[q:2 * q] = mu, -mu
    b = np.zeros(d)
    b[d - 2 * q:d - q], b[d - q:] = mu, -mu
    sizes = cluster_sizes(N, cluster_ratios)
    labels, sample_comps = _sample_components(sizes, mu, 2)
    feature_comps = [[a, a.copy(), a.copy()], [b, b.copy(), b.copy()]]
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((d, d, d, N))
    meta = {"design": "3d", "N": N, "d": d, "mu": mu, "cov": "identity", "rho": 0.0,
            "cluster_sizes": sizes.tolist(), "rank": 2, "seed": seed}
    return _build(feature_comps, sample_comps, labels, noise, meta)
