"""Unit-ball direction oracles and oracle-error measurement.

The exact oracle returns the feasible direction of steepest descent for the
block's norm: the minimizer of <g, d> over the unit ball.  Approximate
oracles (polynomial polar schemes for the spectral geometry) return a nearby
direction; their additive error is measured in the block's primal norm and
never assumed, so all downstream guarantees use observed quantities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import NormKind, frozen, primal_norm
from .errors import DegenerateGradient
from .polar import ErrorModelParams, PolarScheme, approx_polar, apriori_error_bound, scheme_matmul_count

__all__ = [
    "DEGENERACY_THRESHOLD",
    "RANK_DEFICIENCY_THRESHOLD",
    "LmoResult",
    "lmo_spectral_exact",
    "lmo_linf_exact",
    "lmo_euclidean_exact",
    "exact_lmo",
    "lmo_spectral_approx",
    "measure_delta",
]

log = logging.getLogger(__name__)

# below this primal norm the steepest-descent direction is numerically undefined
DEGENERACY_THRESHOLD = 1e-14

# minimum singular value below which the exact spectral direction depends on
# a rank convention; measurements against it are flagged
RANK_DEFICIENCY_THRESHOLD = 1e-8


@dataclass
class LmoResult:
    """Direction produced by an oracle call plus its error bookkeeping.

    declared_delta is an a-priori error bound when the scheme provides one
    (0.0 for exact oracles, the polynomial error-model bound when supplied,
    else None).  measured_delta is filled in by measure_delta.
    """

    direction: np.ndarray
    declared_delta: float | None = None
    measured_delta: float | None = None
    oracle_matmuls: int = 0


def _as_2d(g) -> np.ndarray:
    arr = np.asarray(g, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def _check_degenerate(g: np.ndarray, kind: NormKind):
    if primal_norm(g, kind) < DEGENERACY_THRESHOLD:
        raise DegenerateGradient(
            f"gradient {kind.value} norm below {DEGENERACY_THRESHOLD}"
        )


def _spectral_direction(g: np.ndarray):
    """Negated polar factor of g plus its singular values."""
    u, s, vt = np.linalg.svd(g, full_matrices=False)
    cutoff = max(g.shape) * np.finfo(np.float64).eps * s[0]
    rank = int(np.sum(s > cutoff))
    # singular directions below the rank cutoff contribute zero
    d = -(u[:, :rank] @ vt[:rank])
    return d, s


def lmo_spectral_exact(g) -> LmoResult:
    """Steepest-descent direction on the spectral-norm unit ball.

    For full-rank g this is the negated polar factor; rank-deficient
    directions contribute zero.  Pairing: <g, d> = -nuclear_norm(g).
    """
    arr = _as_2d(g)
    _check_degenerate(arr, NormKind.SPECTRAL)
    d, _ = _spectral_direction(arr)
    return LmoResult(direction=frozen(d, "direction"), declared_delta=0.0)


def lmo_linf_exact(g) -> LmoResult:
    """Steepest-descent direction on the max-norm unit ball: -sign(g).

    Entries that are exactly zero map to zero (ties broken toward zero),
    so <g, d> = -l1_norm(g).
    """
    arr = _as_2d(g)
    _check_degenerate(arr, NormKind.LINF)
    return LmoResult(direction=frozen(-np.sign(arr), "direction"), declared_delta=0.0)


def lmo_euclidean_exact(g) -> LmoResult:
    """Steepest-descent direction on the Euclidean unit ball: -g/||g||."""
    arr = _as_2d(g)
    _check_degenerate(arr, NormKind.EUCLIDEAN)
    norm = np.linalg.norm(arr)
    return LmoResult(direction=frozen(-(arr / norm), "direction"), declared_delta=0.0)


_EXACT = {
    NormKind.SPECTRAL: lmo_spectral_exact,
    NormKind.LINF: lmo_linf_exact,
    NormKind.EUCLIDEAN: lmo_euclidean_exact,
}


def exact_lmo(g, kind: NormKind) -> LmoResult:
    """Exact oracle dispatch on the block's norm."""
    return _EXACT[kind](g)


def lmo_spectral_approx(g, scheme: PolarScheme,
                        error_model: ErrorModelParams | None = None) -> LmoResult:
    """Approximate spectral direction: the negated output of a polar scheme.

    The result need not be feasible (its spectral norm can exceed 1 by the
    oracle error); callers account for that through measured/declared deltas.
    """
    arr = _as_2d(g)
    _check_degenerate(arr, NormKind.SPECTRAL)
    d = -approx_polar(arr, scheme)
    declared = apriori_error_bound(error_model) if error_model is not None else None
    return LmoResult(
        direction=frozen(d, "direction"),
        declared_delta=declared,
        oracle_matmuls=scheme_matmul_count(scheme),
    )


def measure_delta(g, result: LmoResult, kind: NormKind) -> float:
    """Primal-norm distance from result.direction to the exact direction.

    Stores the value into result.measured_delta and returns it.  When the
    spectral reference is nearly rank-deficient the exact direction depends
    on the rank convention, so the measurement is flagged via a log warning.
    """
    arr = _as_2d(g)
    if kind is NormKind.SPECTRAL:
        _check_degenerate(arr, kind)
        exact_dir, s = _spectral_direction(arr)
        if s[-1] < RANK_DEFICIENCY_THRESHOLD:
            log.warning(
                "measure_delta: reference nearly rank-deficient "
                "(min singular value %.3g); measured delta is convention-dependent",
                s[-1],
            )
    else:
        exact_dir = exact_lmo(arr, kind).direction
    delta = primal_norm(result.direction - exact_dir, kind)
    result.measured_delta = delta
    return delta
