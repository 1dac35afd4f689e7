"""Self-contained numerical linear algebra routes independent of LAPACK.

Two deliberately separate implementations live here:

- power-iteration spectral norm (used for exact-homogeneity normalization and
  as an independent check against numpy's SVD-based norms), and
- a one-sided Jacobi SVD (used by the SVD-reference polar scheme and as an
  independent oracle for the exact spectral direction oracle).

Both are plain float64 numpy; neither calls numpy.linalg decompositions, so
results can be cross-checked against the LAPACK-backed production paths.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "spectral_norm_power",
    "jacobi_svd",
    "polar_factor_jacobi",
]


def spectral_norm_power(m, tol: float = 1e-12, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest singular value via power iteration on the Gram operator.

    Deterministic for a fixed seed.  Every floating-point operation commutes
    with power-of-two scaling of the input, so spectral_norm_power(c*m) is
    bitwise equal to c*spectral_norm_power(m) for c a power of two.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0:  # pragma: no cover - zero draw has probability ~0
        v = np.ones(a.shape[1])
        nv = np.linalg.norm(v)
    v = v / nv
    sigma = 0.0
    for _ in range(max_iter):
        w = a @ v
        u = a.T @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        new_sigma = np.linalg.norm(a @ v)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return float(new_sigma)
        sigma = new_sigma
    return float(sigma)


def jacobi_svd(m, tol: float = 1e-15, max_sweeps: int = 60):
    """Thin SVD by one-sided Jacobi rotations on columns.

    Returns (U, s, Vt) with U (rows x k), s descending, Vt (k x cols),
    k = min(rows, cols).  Accuracy is limited only by the rotation tolerance;
    no LAPACK involvement.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    rows, cols = a.shape
    if rows < cols:
        u, s, vt = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return vt.T, s, u.T

    w = a.copy()
    v = np.eye(cols)
    sq = np.einsum("ij,ij->j", w, w)  # cached squared column norms

    for _ in range(max_sweeps):
        rotated = False
        for i in range(cols - 1):
            for j in range(i + 1, cols):
                gamma = float(w[:, i] @ w[:, j])
                if abs(gamma) <= tol * np.sqrt(sq[i] * sq[j]) or gamma == 0.0:
                    continue
                rotated = True
                tau = (sq[j] - sq[i]) / (2.0 * gamma)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0.0 else 1.0
                cs = 1.0 / np.hypot(1.0, t)
                sn = cs * t
                wi = w[:, i].copy()
                w[:, i] = cs * wi - sn * w[:, j]
                w[:, j] = sn * wi + cs * w[:, j]
                vi = v[:, i].copy()
                v[:, i] = cs * vi - sn * v[:, j]
                v[:, j] = sn * vi + cs * v[:, j]
                # clamp: cancellation can push a zero column's cache below 0
                new_i = cs * cs * sq[i] + sn * sn * sq[j] - 2.0 * cs * sn * gamma
                sq[j] = max(sn * sn * sq[i] + cs * cs * sq[j] + 2.0 * cs * sn * gamma, 0.0)
                sq[i] = max(new_i, 0.0)
        if not rotated:
            break

    s = np.sqrt(np.einsum("ij,ij->j", w, w))  # recompute, cache may drift
    order = np.argsort(s)[::-1]
    s = s[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    cutoff = max(rows, cols) * np.finfo(np.float64).eps * (s[0] if s[0] > 0 else 1.0)
    for k in range(cols):
        if s[k] > cutoff:
            u[:, k] = w[:, k] / s[k]
        # columns below the rank cutoff stay zero; callers using the polar
        # convention drop them anyway
    return u, s, v.T


def polar_factor_jacobi(m) -> np.ndarray:
    """Closest partial isometry to m via the Jacobi SVD.

    Singular directions below the rank cutoff contribute zero, matching the
    exact direction oracle's convention on rank-deficient input.
    """
    u, s, vt = jacobi_svd(m)
    return u @ vt
