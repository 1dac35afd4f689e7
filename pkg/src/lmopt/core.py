"""Parameter tensors, the three supported norm geometries, and norm utilities.

Every parameter block is a 2-D float64 array; vectors are (n, 1) matrices so
all norm/oracle code has a single path.  Arrays returned by this module are
read-only, and every public operation validates finiteness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValue, ShapeMismatch

__all__ = [
    "NormKind",
    "ParamBlock",
    "as_matrix",
    "frozen",
    "primal_norm",
    "dual_norm",
    "norm_compat_rho",
]


class NormKind(enum.Enum):
    """Norm placed on a parameter block; the dual pairs with the gradient."""

    SPECTRAL = "spectral"   # largest singular value; dual = nuclear
    LINF = "linf"           # max |entry|; dual = entrywise absolute sum
    EUCLIDEAN = "euclidean" # entrywise l2 (Frobenius); self-dual


def as_matrix(value, name: str = "tensor") -> np.ndarray:
    """Coerce to a validated, read-only 2-D float64 array.

    1-D inputs become column vectors.  Raises ShapeMismatch for other ranks
    and NonFiniteValue if any entry is NaN/inf.
    """
    arr = np.array(value, dtype=np.float64, copy=True, order="C")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ShapeMismatch(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def frozen(arr: np.ndarray, name: str = "tensor") -> np.ndarray:
    """Validate an existing float64 2-D array and mark it read-only in place.

    Cheaper than as_matrix for arrays we just computed and own.
    """
    if arr.dtype != np.float64 or arr.ndim != 2:
        return as_matrix(arr, name)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ParamBlock:
    """Named parameter block with the norm geometry its updates live in."""

    name: str
    value: np.ndarray
    norm: NormKind

    def __post_init__(self):
        object.__setattr__(self, "value", as_matrix(self.value, name=self.name))


def _checked_2d(t, caller: str) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{caller} expects a 1-D or 2-D tensor, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{caller} input contains non-finite entries")
    return arr


def primal_norm(t, kind: NormKind) -> float:
    """Norm of a parameter-space tensor under the block's geometry."""
    arr = _checked_2d(t, "primal_norm")
    if kind is NormKind.SPECTRAL:
        if min(arr.shape) == 1:
            # spectral norm of a single row/column is its l2 norm
            return float(np.linalg.norm(arr))
        return float(np.linalg.norm(arr, 2))
    if kind is NormKind.LINF:
        return float(np.max(np.abs(arr)))
    if kind is NormKind.EUCLIDEAN:
        return float(np.linalg.norm(arr))
    raise ValueError(f"unknown norm kind: {kind!r}")


def dual_norm(t, kind: NormKind) -> float:
    """Norm of a gradient-space tensor: the dual of the block's geometry."""
    arr = _checked_2d(t, "dual_norm")
    if kind is NormKind.SPECTRAL:
        if min(arr.shape) == 1:
            # nuclear norm of a single row/column is its l2 norm
            return float(np.linalg.norm(arr))
        return float(np.sum(np.linalg.svd(arr, compute_uv=False)))
    if kind is NormKind.LINF:
        return float(np.sum(np.abs(arr)))
    if kind is NormKind.EUCLIDEAN:
        return float(np.linalg.norm(arr))
    raise ValueError(f"unknown norm kind: {kind!r}")


def norm_compat_rho(kind: NormKind, shape: tuple[int, int]) -> float:
    """Tight constant rho with dual_norm(t) <= rho * frobenius_norm(t) on `shape`.

    Used to convert Euclidean noise levels into dual-norm noise levels.
    """
    rows, cols = int(shape[0]), int(shape[1])
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"invalid shape {shape!r}")
    if kind is NormKind.SPECTRAL:
        return float(np.sqrt(min(rows, cols)))
    if kind is NormKind.LINF:
        return float(np.sqrt(rows * cols))
    if kind is NormKind.EUCLIDEAN:
        return 1.0
    raise ValueError(f"unknown norm kind: {kind!r}")
