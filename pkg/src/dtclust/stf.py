"""Rank-R structured CP factorization by truncated, fused power iterations.

Each rank is fitted by alternating updates over the modes: contract the
tensor against the other modes' current vectors, normalize, fuse and
truncate, normalize again. The fitted rank-one term is then deflated from
the tensor before the next rank starts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dtclust.proxops import DegenerateVector, normalize, truncatefuse, tv_seminorm
from dtclust.tensor import (
    DimensionMismatch,
    FactorSet,
    _as_array,
    _contract_except,
    _cp_array,
    outer,
)

logger = logging.getLogger(__name__)


class InvalidSpec(ValueError):
    """Constraint settings that do not fit the tensor."""


@dataclass
class ConstraintSpec:
    """Per-mode constraints and iteration controls.

    Parameters
    ----------
    sparsity : sequence of int or None, optional
        Cardinality ``s_j`` per mode. ``None`` (for the whole list or one
        entry) means no truncation on that mode, i.e. ``s_j = d_j``.
    fusion : float or sequence of float
        Fusion weight ``lambda_j`` per mode; a scalar applies to all modes.
        Zero disables fusion.
    tied_modes : sequence of sequence of int
        Groups of modes whose factors are forced equal (0-based). The
        lowest mode of a group is its leader.
    max_iters, conv_tol :
        Stop after ``max_iters`` sweeps or once the summed squared change
        of all factors in a sweep is at most ``conv_tol``.
    n_restarts : int
        Random initializations per rank; the one with largest ``|w|`` wins.
    rng_seed : int
    """

    sparsity: Sequence[int | None] | None = None
    fusion: float | Sequence[float] = 0.0
    tied_modes: Sequence[Sequence[int]] = ()
    max_iters: int = 20
    conv_tol: float = 1e-4
    n_restarts: int = 5
    rng_seed: int = 0

    def resolve(self, dims: Sequence[int]):
        """Validate against ``dims``; return ``(s, lam, leader)`` arrays."""
        dims = tuple(int(d) for d in dims)
        m = len(dims)
        if self.sparsity is None:
            s = np.array(dims, dtype=np.intp)
        else:
            if len(self.sparsity) != m:
                raise InvalidSpec(f"sparsity has {len(self.sparsity)} entries for {m} modes")
            s = np.array([d if sj is None else int(sj) for sj, d in zip(self.sparsity, dims)],
                         dtype=np.intp)
        for j, (sj, d) in enumerate(zip(s, dims)):
            if not 1 <= sj <= d:
                raise InvalidSpec(f"sparsity s_{j}={sj} outside [1, {d}]")
        if np.ndim(self.fusion) == 0:
            lam = np.full(m, float(self.fusion))
        else:
            if len(self.fusion) != m:
                raise InvalidSpec(f"fusion has {len(self.fusion)} entries for {m} modes")
            lam = np.array(self.fusion, dtype=np.float64)
        if np.any(lam < 0) or np.any(np.isnan(lam)):
            raise InvalidSpec(f"fusion weights must be nonnegative, got {lam.tolist()}")
        leader = np.arange(m)
        seen = set()
        for group in self.tied_modes:
            group = sorted(int(g) for g in group)
            if not group:
                continue
            for g in group:
                if not 0 <= g < m:
                    raise InvalidSpec(f"tied mode {g} out of range for {m} modes")
                if g in seen:
                    raise InvalidSpec(f"mode {g} appears in more than one tied group")
                seen.add(g)
                if dims[g] != dims[group[0]]:
                    raise InvalidSpec(f"tied modes {group} have different dimensions")
            leader[group] = group[0]
        if self.max_iters < 1:
            raise InvalidSpec("max_iters must be >= 1")
        if self.n_restarts < 1:
            raise InvalidSpec("n_restarts must be >= 1")
        if self.conv_tol < 0:
            raise InvalidSpec("conv_tol must be nonnegative")
        return s, lam, leader


@dataclass
class StfReport:
    iterations: list[int] = field(default_factory=list)
    restart_chosen: list[int] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)
    residual_norm: float = float("nan")
    objective: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "iterations": list(self.iterations),
            "restart_chosen": list(self.restart_chosen),
            "converged": list(self.converged),
            "residual_norm": self.residual_norm,
            "objective": self.objective,
        }


def _update(arr, vecs, j, s_j, lam_j):
    v = normalize(_contract_except(arr, vecs, j))
    return normalize(truncatefuse(v, s_j, lam_j))


def power_update(T, factors: Sequence, j: int, spec: ConstraintSpec) -> np.ndarray:
    """One structured power step for mode ``j``.

    ``factors`` holds the current unit vector of every mode; entry ``j``
    is ignored. Returns the new unit vector for mode ``j``.
    """
    arr = _as_array(T)
    s, lam, _ = spec.resolve(arr.shape)
    vecs = [np.asarray(f, dtype=np.float64) for f in factors]
    if len(vecs) != arr.ndim:
        raise InvalidSpec(f"need one vector per mode ({arr.ndim}), got {len(vecs)}")
    return _update(arr, vecs, j, s[j], lam[j])


def _fit_rank_one(arr, init, s, lam, leader, max_iters, conv_tol):
    m = arr.ndim
    vecs = list(init)
    iters = 0
    converged = False
    for _ in range(max_iters):
        iters += 1
        change = 0.0
        for j in range(m):
            if leader[j] != j:
                continue
            new = _update(arr, vecs, j, s[j], lam[j])
            for k in range(m):
                if leader[k] == j:
                    change += float(np.sum((new - vecs[k]) ** 2))
                    vecs[k] = new
        if change <= conv_tol:
            converged = True
            break
    w = float(_contract_except(arr, vecs, m - 1) @ vecs[m - 1])
    return w, vecs, iters, converged


def stf_decompose(T, R: int, spec: ConstraintSpec | None = None):
    """Greedy rank-by-rank structured CP factorization.

    Parameters
    ----------
    T : DenseTensor
    R : int
        Number of rank-one terms.
    spec : ConstraintSpec, optional
        Defaults to no sparsity and no fusion.

    Returns
    -------
    factors : FactorSet
    report : StfReport

    Raises
    ------
    DegenerateVector
        If every restart of some rank collapses to a zero vector.
    """
    spec = spec or ConstraintSpec()
    if int(R) < 1:
        raise InvalidSpec(f"rank must be >= 1, got {R}")
    original = _as_array(T)
    dims = original.shape
    s, lam, leader = spec.resolve(dims)
    rng = np.random.default_rng(spec.rng_seed)
    resid = np.array(original, dtype=np.float64, copy=True)
    m = len(dims)
    weights = np.zeros(R)
    factors = [np.zeros((d, R)) for d in dims]
    report = StfReport()

    for r in range(R):
        best = None
        for attempt in range(spec.n_restarts):
            init = [None] * m
            for j in range(m):
                init[j] = normalize(rng.standard_normal(dims[j]))
            for j in range(m):
                init[j] = init[leader[j]]
            try:
                w, vecs, iters, conv = _fit_rank_one(
                    resid, init, s, lam, leader, spec.max_iters, spec.conv_tol
                )
            except DegenerateVector:
                logger.debug("rank %d restart %d collapsed to zero", r, attempt)
                continue
            if best is None or abs(w) > abs(best[0]):
                best = (w, vecs, iters, conv, attempt)
        if best is None:
            raise DegenerateVector(
                f"rank {r}: all {spec.n_restarts} initializations collapsed to zero"
            )
        w, vecs, iters, conv, attempt = best
        weights[r] = w
        for j in range(m):
            factors[j][:, r] = vecs[j]
        resid -= w * outer(vecs)
        report.iterations.append(iters)
        report.converged.append(conv)
        report.restart_chosen.append(attempt)

    F = FactorSet(weights, factors)
    report.residual_norm = float(np.linalg.norm(resid.reshape(-1)))
    report.objective = _objective(original, F, lam)
    return F, report


def _objective(arr, F, lam):
    fit = arr - _cp_array(F.weights, F.factors)
    val = float(np.dot(fit.reshape(-1), fit.reshape(-1)))
    for j, f in enumerate(F.factors):
        if lam[j] > 0:
            val += lam[j] * sum(tv_seminorm(f[:, r]) for r in range(F.rank))
    return val


def objective_value(T, F: FactorSet, spec: ConstraintSpec | None = None) -> float:
    """Squared residual plus the per-mode fused-lasso penalties."""
    spec = spec or ConstraintSpec()
    arr = _as_array(T)
    if F.dims != arr.shape:
        raise DimensionMismatch(f"factor dims {F.dims} vs tensor dims {arr.shape}")
    _, lam, _ = spec.resolve(arr.shape)
    return _objective(arr, F, lam)


__all__ = [
    "ConstraintSpec",
    "InvalidSpec",
    "StfReport",
    "objective_value",
    "power_update",
    "stf_decompose",
]
