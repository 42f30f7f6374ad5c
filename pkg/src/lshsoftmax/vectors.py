"""Sparse and dense vector primitives shared across the package.

Dense vectors are plain 1-D float64 numpy arrays. Sparse vectors carry
sorted index/value pairs and are the native representation for dataset
rows with very high feature dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lshsoftmax.errors import DegenerateInputError


@dataclass(frozen=True)
class SparseVector:
    """Index/value representation of a mostly-zero vector.

    Invariants: ``indices`` strictly increasing in ``[0, dim)``, ``values``
    nonzero and finite, both arrays the same length.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        if indices.ndim != 1 or indices.shape != values.shape:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if self.dim < 0:
            raise ValueError("dim must be non-negative")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= self.dim:
                raise ValueError(f"indices must lie in [0, {self.dim})")
            if np.any(np.diff(indices) <= 0):
                raise ValueError("indices must be strictly increasing")
            if np.any(values == 0.0):
                raise ValueError("values must be nonzero")
            if not np.all(np.isfinite(values)):
                raise ValueError("values must be finite")

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @classmethod
    def from_dense(cls, dense, dim: int | None = None) -> "SparseVector":
        arr = np.asarray(dense, dtype=np.float64).ravel()
        idx = np.flatnonzero(arr)
        return cls(idx, arr[idx], dim if dim is not None else arr.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out


def as_index_value(v) -> tuple[np.ndarray, np.ndarray, int]:
    """Normalize a SparseVector or dense array to (indices, values, dim)."""
    if isinstance(v, SparseVector):
        return v.indices, v.values, v.dim
    arr = np.asarray(v, dtype=np.float64).ravel()
    idx = np.flatnonzero(arr)
    return idx, arr[idx], arr.size


def is_all_zero(v) -> bool:
    if isinstance(v, SparseVector):
        return v.nnz == 0
    return not np.any(np.asarray(v))


def cosine(x, y) -> float:
    """Cosine similarity of two vectors; raises on zero input."""
    xi, xv, dx = as_index_value(x)
    yi, yv, dy = as_index_value(y)
    if dx != dy:
        raise ValueError(f"dimension mismatch: {dx} vs {dy}")
    nx = np.linalg.norm(xv)
    ny = np.linalg.norm(yv)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateInputError("cosine undefined for a zero vector")
    # sparse-sparse dot over the index intersection
    common, ix, iy = np.intersect1d(xi, yi, assume_unique=True, return_indices=True)
    dot = float(xv[ix] @ yv[iy]) if common.size else 0.0
    return dot / (nx * ny)
