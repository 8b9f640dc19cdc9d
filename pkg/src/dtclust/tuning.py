"""Model selection for the factorization: a BIC-type score over a grid."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from numbers import Integral
from typing import Sequence

import numpy as np

from dtclust.stf import ConstraintSpec, InvalidSpec, stf_decompose
from dtclust.tensor import FactorSet, _as_array, _cp_array

VALUE_TOL = 1e-8
EPS_RSS = 1e-12


def _distinct_nonzero(col: np.ndarray, tol: float) -> int:
    vals = np.sort(col[col != 0.0])
    if vals.size == 0:
        return 0
    return 1 + int(np.count_nonzero(np.diff(vals) > tol))


def degrees_of_freedom(F: FactorSet, value_tol: float = VALUE_TOL) -> int:
    """Sum over all factor columns of the number of distinct nonzero values.

    Values closer than ``value_tol`` (after sorting, adjacent gaps) count once.
    """
    if value_tol < 0:
        raise ValueError("value_tol must be nonnegative")
    return sum(_distinct_nonzero(f[:, r], value_tol) for f in F.factors for r in range(F.rank))


def bic_score(T, F: FactorSet, value_tol: float = VALUE_TOL) -> float:
    """``log(RSS / prod d) + sum(log d) / prod d * df``, with RSS clamped below."""
    arr = _as_array(T)
    resid = arr - _cp_array(F.weights, F.factors)
    rss = float(np.dot(resid.reshape(-1), resid.reshape(-1)))
    size = float(arr.size)
    penalty = sum(math.log(d) for d in arr.shape) / size
    return math.log(max(rss, EPS_RSS) / size) + penalty * degrees_of_freedom(F, value_tol)


@dataclass
class TuneGrid:
    """Candidate ranks, sparsity levels and fusion weights.

    A sparsity candidate given as a float in (0, 1] is a fraction of each
    mode's length; an int is an absolute cardinality. The same candidate is
    applied to every mode in ``sparse_modes`` and each fusion weight to
    every mode in ``fused_modes``. Both default to all modes but the last
    (sample) mode, whose ordering is arbitrary in general. ``shared=False``
    is not supported for the grid search itself; per-mode values belong in
    the base ``ConstraintSpec``.
    """

    ranks: Sequence[int] = (2,)
    sparsity: Sequence[float | int] = (1.0,)
    lambdas: Sequence[float] = (0.0,)
    sparse_modes: Sequence[int] | None = None
    fused_modes: Sequence[int] | None = None
    shared: bool = True

    def __post_init__(self):
        if not (self.ranks and self.sparsity and self.lambdas):
            raise ValueError("tuning grid must be non-empty along every axis")
        if not self.shared:
            raise ValueError("only shared-across-modes grids are supported")

    def points(self):
        for R in sorted(self.ranks):
            for s in sorted(self.sparsity, key=float):
                for lam in sorted(self.lambdas):
                    yield R, s, lam

    def _modes(self, which, m, default):
        if which is None:
            return list(default)
        out = [int(j) % m for j in which]
        return out

    def spec_for(self, dims, s, lam, base: ConstraintSpec) -> ConstraintSpec:
        m = len(dims)
        sparse = set(self._modes(self.sparse_modes, m, range(m - 1)))
        fused = set(self._modes(self.fused_modes, m, range(m - 1)))
        sparsity = []
        for j, d in enumerate(dims):
            if j not in sparse:
                sparsity.append(None)
            elif isinstance(s, Integral):
                if not 1 <= s <= d:
                    raise InvalidSpec(f"sparsity {s} is invalid for mode {j} of length {d}")
                sparsity.append(int(s))
            else:
                if not 0.0 < float(s) <= 1.0:
                    raise InvalidSpec(f"sparsity fraction {s} outside (0, 1]")
                sparsity.append(max(1, int(round(float(s) * d))))
        fusion = [float(lam) if j in fused else 0.0 for j in range(m)]
        return dataclasses.replace(base, sparsity=sparsity, fusion=fusion)


@dataclass
class GridScore:
    R: int
    s: float | int
    lam: float
    bic: float
    df: int
    rss: float
    factors: FactorSet = field(repr=False)

    def as_row(self) -> dict:
        return {"R": self.R, "s": self.s, "lambda": self.lam, "bic": self.bic,
                "df": self.df, "rss": self.rss}


def select_model(T, grid: TuneGrid, base_spec: ConstraintSpec | None = None):
    """Fit every grid point and return the one minimizing :func:`bic_score`.

    Every point reuses ``base_spec.rng_seed``. Ties go to the smallest R,
    then smallest s, then smallest lambda.

    Returns
    -------
    best : GridScore
    scores : list of GridScore, in grid order
    """
    base = base_spec or ConstraintSpec()
    arr = _as_array(T)
    scores = []
    for R, s, lam in grid.points():
        spec = grid.spec_for(arr.shape, s, lam, base)
        F, rep = stf_decompose(arr, R, spec)
        scores.append(GridScore(R, s, lam, bic_score(arr, F), degrees_of_freedom(F),
                                rep.residual_norm ** 2, F))
    best = min(scores, key=lambda g: (g.bic, g.R, float(g.s), g.lam))
    return best, scores
