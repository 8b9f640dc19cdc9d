"""Dense tensor storage and the multilinear primitives used by the factorization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DimensionMismatch(ValueError):
    """Raised when tensor or vector shapes do not line up."""


class DenseTensor:
    """Immutable m-way array of float64 values.

    Storage is a single flat array with the last index varying fastest
    (C order), so slices along the last mode are contiguous.

    Parameters
    ----------
    data : array_like
        Either an m-way array, or a flat array together with ``dims``.
    dims : sequence of int, optional
        Dimension vector; required when ``data`` is flat.
    """

    __slots__ = ("_array",)

    def __init__(self, data, dims: Sequence[int] | None = None):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if dims is not None:
            dims = tuple(int(d) for d in dims)
            if arr.size != int(np.prod(dims)):
                raise DimensionMismatch(
                    f"data has {arr.size} entries, dims {dims} need {int(np.prod(dims))}"
                )
            arr = arr.reshape(dims)
        if arr.ndim < 1:
            raise DimensionMismatch("tensor order must be at least 1")
        if any(d < 1 for d in arr.shape):
            raise DimensionMismatch(f"every dimension must be >= 1, got {arr.shape}")
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "DenseTensor":
        # no-copy constructor for arrays we own
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        arr.flags.writeable = False
        obj._array = arr
        return obj

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "DenseTensor":
        return cls._wrap(np.zeros(tuple(dims)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def data(self) -> np.ndarray:
        """Flat read-only view, last index fastest."""
        return self._array.reshape(-1)

    @property
    def array(self) -> np.ndarray:
        """Read-only m-way view."""
        return self._array

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._array
        return self._array.astype(dtype)

    def __repr__(self) -> str:
        return f"DenseTensor(dims={self.dims})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self._array, other._array)

    __hash__ = None


@dataclass
class FactorSet:
    """Rank-R CP factorization: ``sum_r w_r b_{1,r} o ... o b_{m,r}``.

    Attributes
    ----------
    weights : ndarray, shape (R,)
    factors : list of ndarray
        One ``(d_j, R)`` matrix per mode; column r is the unit-norm factor of rank r.
    """

    weights: np.ndarray
    factors: list[np.ndarray]

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        self.factors = [np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in self.factors]
        R = self.weights.shape[0]
        for j, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[1] != R:
                raise DimensionMismatch(f"factor {j} has shape {f.shape}, expected (d_{j}, {R})")

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def check_unit_norm(self, tol: float = 1e-8) -> bool:
        return all(np.all(np.abs(np.linalg.norm(f, axis=0) - 1.0) <= tol) for f in self.factors)


def _as_array(T) -> np.ndarray:
    if isinstance(T, DenseTensor):
        return T.array
    return np.asarray(T, dtype=np.float64)


def stack_samples(samples: Sequence[DenseTensor]) -> DenseTensor:
    """Stack N equally shaped tensors into one tensor whose last mode indexes samples."""
    if len(samples) == 0:
        raise ValueError("cannot stack an empty list of samples")
    arrays = [_as_array(s) for s in samples]
    dims = arrays[0].shape
    for i, a in enumerate(arrays):
        if a.shape != dims:
            raise DimensionMismatch(f"sample {i} has dims {a.shape}, expected {dims}")
    return DenseTensor._wrap(np.stack(arrays, axis=-1))


def _check_vectors(dims, vectors, skip=None):
    modes = [k for k in range(len(dims)) if k != skip]
    if len(vectors) != len(modes):
        raise DimensionMismatch(f"expected {len(modes)} vectors, got {len(vectors)}")
    out = []
    for k, v in zip(modes, vectors):
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.shape[0] != dims[k]:
            raise DimensionMismatch(f"vector for mode {k} has length {v.shape[0]}, expected {dims[k]}")
        out.append(v)
    return out


def _contract_except(arr: np.ndarray, vectors: Sequence[np.ndarray], j: int) -> np.ndarray:
    # vectors: full per-mode list; entry j is ignored.
    # Contract trailing modes first (matvec on contiguous last axis), then leading modes.
    out = arr
    for k in range(arr.ndim - 1, j, -1):
        out = out.reshape(-1, arr.shape[k]) @ vectors[k]
    out = out.reshape(arr.shape[: j + 1])
    for k in range(j):
        out = vectors[k] @ out.reshape(arr.shape[k], -1)
    return out.reshape(arr.shape[j])


def contract_except(T, vectors: Sequence, j: int) -> np.ndarray:
    """Multiply T by one vector along every mode except ``j``.

    Parameters
    ----------
    T : DenseTensor
    vectors : sequence of 1-D arrays
        One vector per mode other than ``j``, in mode order.
    j : int
        The free mode (0-based).

    Returns
    -------
    ndarray of length ``d_j``.
    """
    arr = _as_array(T)
    if not 0 <= j < arr.ndim:
        raise IndexError(f"mode {j} out of range for order-{arr.ndim} tensor")
    vecs = _check_vectors(arr.shape, vectors, skip=j)
    full = vecs[:j] + [None] + vecs[j:]
    return _contract_except(arr, full, j)


def full_contract(T, vectors: Sequence) -> float:
    """Multilinear form ``T x_1 a_1 x_2 ... x_m a_m``."""
    arr = _as_array(T)
    vecs = _check_vectors(arr.shape, vectors)
    last = vecs[-1]
    head = _contract_except(arr, vecs, arr.ndim - 1)
    return float(head @ last)


def outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(vectors[0], dtype=np.float64)
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def _cp_array(weights: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    # sum_r w_r outer(f_1[:, r], ..., f_m[:, r]) via a Khatri-Rao style product
    dims = tuple(f.shape[0] for f in factors)
    R = weights.shape[0]
    acc = factors[0] * weights
    for f in factors[1:]:
        acc = (acc[:, None, :] * f[None, :, :]).reshape(-1, R)
    return acc.sum(axis=1).reshape(dims)


def cp_reconstruct(F: FactorSet, dims: Sequence[int] | None = None) -> DenseTensor:
    """Dense tensor of a CP factorization."""
    if dims is not None and tuple(dims) != F.dims:
        raise DimensionMismatch(f"factor dims {F.dims} do not match requested {tuple(dims)}")
    return DenseTensor._wrap(_cp_array(F.weights, F.factors))


def subtract_rank_one(T, w: float, vectors: Sequence) -> DenseTensor:
    """Deflate: ``T - w * (v_1 o ... o v_m)``."""
    arr = _as_array(T)
    vecs = _check_vectors(arr.shape, vectors)
    return DenseTensor._wrap(arr - w * outer(vecs))


def frobenius_norm(T) -> float:
    arr = _as_array(T)
    return float(np.sqrt(np.dot(arr.reshape(-1), arr.reshape(-1))))
