"""Tensor file I/O, CSV import, and sliding-window correlation tensors.

Binary layout of a tensor file (all integers little-endian)::

    magic   4 bytes  b"DTNS"
    version u16      1
    order   u16      m
    dims    m x u64
    payload prod(dims) x float64 (IEEE-754, little-endian), last index fastest
"""
from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dtclust.tensor import DenseTensor

MAGIC = b"DTNS"
VERSION = 1
_HEAD = struct.Struct("<4sHH")


class MalformedFile(ValueError):
    pass


class TruncatedPayload(MalformedFile):
    pass


class RaggedCsv(ValueError):
    pass


class CsvParseError(ValueError):
    def __init__(self, row: int, col: int, cell: str):
        super().__init__(f"row {row}, column {col}: cannot parse {cell!r} as a number")
        self.row, self.col, self.cell = row, col, cell


class ZeroVarianceWarning(UserWarning):
    """A series was constant inside a window; its correlations were set to 0."""


def write_tensor(T, path) -> None:
    arr = T.array if isinstance(T, DenseTensor) else np.asarray(T, dtype=np.float64)
    header = _HEAD.pack(MAGIC, VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path) -> DenseTensor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise MalformedFile(f"{path}: file shorter than the header")
    magic, version, order = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise MalformedFile(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MalformedFile(f"{path}: unsupported format version {version}")
    if order < 1:
        raise MalformedFile(f"{path}: tensor order must be >= 1")
    off = _HEAD.size + 8 * order
    if len(raw) < off:
        raise MalformedFile(f"{path}: header truncated")
    dims = struct.unpack_from(f"<{order}Q", raw, _HEAD.size)
    if any(d < 1 for d in dims):
        raise MalformedFile(f"{path}: zero dimension in {dims}")
    need = 8 * math.prod(dims)
    have = len(raw) - off
    if have < need:
        raise TruncatedPayload(f"{path}: payload has {have} bytes, expected {need}")
    if have > need:
        raise MalformedFile(f"{path}: {have - need} trailing bytes after payload")
    data = np.frombuffer(raw, dtype="<f8", count=need // 8, offset=off)
    return DenseTensor(data.astype(np.float64), dims)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def import_matrix_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV, one series per row.

    A first row containing any non-numeric cell is treated as a header.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    start = 0
    if not all(_is_number(c.strip()) for c in rows[0]):
        start = 1
        if len(rows) == 1:
            raise ValueError(f"{path}: only a header row")
    width = len(rows[start])
    out = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise RaggedCsv(f"{path}: row {i} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row, start=1):
            try:
                out[i - start - 1, j - 1] = float(cell.strip())
            except ValueError:
                raise CsvParseError(i, j, cell) from None
    return out


@dataclass(frozen=True)
class WindowSpec:
    width: int = 20
    step: int = 1

    def count(self, t_len: int) -> int:
        """Number of windows, ``floor((t_len - width) / step) + 1``."""
        self.validate(t_len)
        return (t_len - self.width) // self.step + 1

    def validate(self, t_len: int) -> None:
        if self.width < 2:
            raise ValueError("window width must be >= 2")
        if self.step < 1:
            raise ValueError("window step must be >= 1")
        if self.width > t_len:
            raise ValueError(f"window width {self.width} exceeds series length {t_len}")


def sliding_corr(ts, spec: WindowSpec = WindowSpec(), return_flags: bool = False):
    """Pearson correlation matrix of every window, stacked into (p, p, t).

    Constant series inside a window get zero off-diagonal correlations and
    a :class:`ZeroVarianceWarning`. With ``return_flags`` the per-window
    boolean flags are returned too.
    """
    X = np.asarray(ts, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a (p, T) matrix with p >= 2")
    p, t_len = X.shape
    t = spec.count(t_len)
    out = np.empty((p, p, t))
    flags = np.zeros(t, dtype=bool)
    for k in range(t):
        W = X[:, k * spec.step:k * spec.step + spec.width]
        Wc = W - W.mean(axis=1, keepdims=True)
        cov = Wc @ Wc.T / (spec.width - 1)
        sd = np.sqrt(np.diag(cov))
        flat = sd <= 1e-12 * max(1.0, float(np.abs(W).max()))
        sd_safe = np.where(flat, 1.0, sd)
        C = cov / np.outer(sd_safe, sd_safe)
        if flat.any():
            flags[k] = True
            C[flat, :] = 0.0
            C[:, flat] = 0.0
        np.clip(C, -1.0, 1.0, out=C)
        C = 0.5 * (C + C.T)
        np.fill_diagonal(C, 1.0)
        out[:, :, k] = C
    if flags.any():
        warnings.warn(f"{int(flags.sum())} window(s) contain a constant series; "
                      "their correlations were set to 0", ZeroVarianceWarning, stacklevel=2)
    T = DenseTensor._wrap(out)
    return (T, flags) if return_flags else T
