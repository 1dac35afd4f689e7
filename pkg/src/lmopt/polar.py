"""Approximate polar-factor schemes for the spectral direction oracle.

A scheme maps a nonzero matrix M to an approximation of its polar factor
(the closest partial isometry).  Polynomial schemes normalize M so its
spectrum lies in (0, 1], then repeat odd matrix polynomial steps

    X <- a*X + b*(X X^T) X + c*(X X^T)^2 X

with per-iteration coefficient rows (a, b, c).  The built-in NewtonSchulz
scheme uses the classical convergent cubic row (1.5, -0.5, 0.0); faster,
non-convergent rows such as the well-known quintic (3.4445, -4.7750, 2.0315)
can be supplied as data via PolynomialTable or a coefficient-table file.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix, frozen
from .errors import DegenerateGradient, ParseError, SchemeDiverged
from .linalg import polar_factor_jacobi, spectral_norm_power

__all__ = [
    "PolarKind",
    "Normalization",
    "PolarScheme",
    "ErrorModelParams",
    "NEWTON_SCHULZ_COEFFS",
    "MUON_QUINTIC_COEFFS",
    "approx_polar",
    "scheme_matmul_count",
    "apriori_error_bound",
    "load_coefficient_table",
]

log = logging.getLogger(__name__)

# classical convergent cubic: X <- (3X - X X^T X) / 2
NEWTON_SCHULZ_COEFFS = (1.5, -0.5, 0.0)
# aggressive quintic popularized by matrix-momentum optimizers; fast early
# progress but oscillates near the polar factor instead of converging
MUON_QUINTIC_COEFFS = (3.4445, -4.7750, 2.0315)

# iterates whose spectral norm passes this are treated as diverged
DIVERGENCE_LIMIT = 10.0

# |a + b + c - 1| above this logs a sanity warning (row does not fix
# singular values at 1); deliberately non-fatal, some useful rows violate it
COEFF_SUM_WARN = 1e-3


class PolarKind(enum.Enum):
    NEWTON_SCHULZ = "newton-schulz"
    POLYNOMIAL_TABLE = "polynomial-table"
    SVD_REFERENCE = "svd-reference"


class Normalization(enum.Enum):
    """How the input is scaled before polynomial iterations.

    FROBENIUS divides by the Frobenius norm (cheap, spectrum may start far
    below 1).  SPECTRAL divides by a power-iteration spectral norm so the top
    singular value starts at 1; both are exactly homogeneous under
    power-of-two scaling of the input.
    """

    FROBENIUS = "frobenius"
    SPECTRAL = "spectral"


def _check_rows(rows) -> tuple[tuple[float, float, float], ...]:
    out = []
    for idx, row in enumerate(rows):
        row = tuple(float(v) for v in row)
        if len(row) != 3:
            raise ValueError(f"coefficient row {idx} must have 3 entries, got {len(row)}")
        if abs(sum(row) - 1.0) > COEFF_SUM_WARN:
            log.warning(
                "coefficient row %d sums to %.6g (not 1): singular values at 1 "
                "are not fixed by this row", idx, sum(row),
            )
        out.append(row)
    if not out:
        raise ValueError("coefficient table is empty")
    return tuple(out)


@dataclass(frozen=True)
class PolarScheme:
    """Configuration of one polar-approximation method.

    `iterations` polynomial steps are run; when the coefficient table is
    shorter than `iterations` the last row is reused for the remainder.
    SVD_REFERENCE ignores iterations/coefficients and returns the polar
    factor from the in-repo Jacobi SVD.
    """

    kind: PolarKind
    iterations: int = 5
    coefficients: tuple[tuple[float, float, float], ...] = (NEWTON_SCHULZ_COEFFS,)
    normalization: Normalization = Normalization.FROBENIUS

    def __post_init__(self):
        if self.kind is not PolarKind.SVD_REFERENCE:
            if self.iterations < 1:
                raise ValueError(f"iterations must be >= 1, got {self.iterations}")
            object.__setattr__(self, "coefficients", _check_rows(self.coefficients))

    @classmethod
    def newton_schulz(cls, iterations: int = 5,
                      normalization: Normalization = Normalization.FROBENIUS) -> "PolarScheme":
        return cls(PolarKind.NEWTON_SCHULZ, iterations, (NEWTON_SCHULZ_COEFFS,), normalization)

    @classmethod
    def polynomial(cls, coefficients, iterations: int | None = None,
                   normalization: Normalization = Normalization.FROBENIUS) -> "PolarScheme":
        rows = tuple(tuple(r) for r in coefficients)
        if iterations is None:
            iterations = len(rows)
        return cls(PolarKind.POLYNOMIAL_TABLE, iterations, rows, normalization)

    @classmethod
    def svd_reference(cls) -> "PolarScheme":
        return cls(PolarKind.SVD_REFERENCE, iterations=0)

    def row(self, k: int) -> tuple[float, float, float]:
        """Coefficient row for iteration k (last row repeats)."""
        return self.coefficients[min(k, len(self.coefficients) - 1)]


@dataclass(frozen=True)
class ErrorModelParams:
    """Inputs to the a-priori polynomial-iteration error bound.

    ell: lower bound on the singular values of the normalized input, in (0, 1].
    q:   degree parameter of the polynomial family (kept as named in the
         source analysis; q=1 covers the cubic family).
    p:   number of iterations.
    """

    ell: float
    q: int = 1
    p: int = 1

    def __post_init__(self):
        if not (0.0 < self.ell <= 1.0):
            raise ValueError(f"ell must be in (0, 1], got {self.ell}")
        if self.q < 1 or self.p < 1:
            raise ValueError("q and p must be >= 1")


def apriori_error_bound(params: ErrorModelParams) -> float:
    """Worst-case spectral error |1 - ell^2|^((q+1)^p) of the iterated family."""
    return float(abs(1.0 - params.ell ** 2) ** ((params.q + 1) ** params.p))


def scheme_matmul_count(scheme: PolarScheme) -> int:
    """Matrix multiplications one approx_polar call performs."""
    if scheme.kind is PolarKind.SVD_REFERENCE:
        return 0
    total = 0
    for k in range(scheme.iterations):
        _, _, c = scheme.row(k)
        total += 2 if c == 0.0 else 3
    return total


def _spectral_guard(x: np.ndarray):
    # Frobenius dominates spectral, so the exact check is rarely needed
    if np.linalg.norm(x) <= DIVERGENCE_LIMIT:
        return
    if np.linalg.norm(x, 2) > DIVERGENCE_LIMIT:
        raise SchemeDiverged(
            f"polynomial iterate spectral norm exceeded {DIVERGENCE_LIMIT}"
        )


def approx_polar(m, scheme: PolarScheme) -> np.ndarray:
    """Approximate polar factor of m under the given scheme.

    Works in the tall orientation internally (transposes when rows < cols)
    and transposes back, so callers never reorient.  Output spectrum matches
    how far the polynomial has pushed the normalized spectrum toward 1.
    """
    a = as_matrix(m, "polar input")
    if scheme.kind is PolarKind.SVD_REFERENCE:
        return frozen(polar_factor_jacobi(a), "polar approximation")

    transposed = a.shape[0] < a.shape[1]
    x = a.T if transposed else a

    if scheme.normalization is Normalization.FROBENIUS:
        scale = float(np.linalg.norm(x))
    else:
        scale = spectral_norm_power(x)
    if scale == 0.0:
        raise DegenerateGradient("cannot normalize a zero matrix")
    x = x / scale

    for k in range(scheme.iterations):
        ca, cb, cc = scheme.row(k)
        gram = x @ x.T
        bx = gram @ x
        if cc == 0.0:
            x = ca * x + cb * bx
        else:
            x = ca * x + cb * bx + cc * (gram @ bx)
        if not np.all(np.isfinite(x)):
            raise SchemeDiverged("polynomial iterate is non-finite")
        _spectral_guard(x)

    if transposed:
        x = x.T
    return frozen(np.ascontiguousarray(x), "polar approximation")


def load_coefficient_table(path, iterations: int | None = None,
                           normalization: Normalization = Normalization.FROBENIUS) -> PolarScheme:
    """Parse a coefficient-table file into a POLYNOMIAL_TABLE scheme.

    Format: one iteration per line, three whitespace-separated decimal
    numbers `a b c`; `#` starts a comment (full-line or trailing); blank
    lines are skipped.  Numbers are parsed as decimal float64, so a file
    round-trips bit-exactly through repr().
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 coefficients, got {len(parts)}", line=lineno
                )
            try:
                rows.append(tuple(float(p) for p in parts))
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", line=lineno) from exc
    if not rows:
        raise ParseError("no coefficient rows found")
    return PolarScheme.polynomial(rows, iterations=iterations, normalization=normalization)
