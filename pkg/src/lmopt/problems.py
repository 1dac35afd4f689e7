"""Desk-scale benchmark problems with certified smoothness constants.

Every problem exposes exact values/gradients, a known optimal value (or a
certified lower bound), per-block norm geometry, and a deterministic
stochastic-gradient model.  Noise streams are keyed by (seed, step, block),
never by optimizer settings, so different oracle/step configurations see
common random numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NormKind, frozen
from .errors import MissingCertificate, ShapeMismatch

__all__ = [
    "BlockSpec",
    "Problem",
    "MatrixQuadratic",
    "LogisticRegression",
    "MatrixFactorization",
    "QuarticWell",
    "make_matrix_quadratic",
    "make_logistic",
    "make_matrix_factorization",
    "make_quartic",
    "stochastic_gradient",
]

_NOISE_SALT = 101
_SAMPLE_SALT = 202


@dataclass(frozen=True)
class BlockSpec:
    """Shape and norm geometry of one parameter block."""

    name: str
    shape: tuple[int, int]
    norm: NormKind


class Problem:
    """Base class: exact oracle plus an additive-Gaussian stochastic model.

    sigma is the total noise level: the stochastic gradient satisfies
    E[g_hat] = grad and E||g_hat - grad||_2^2 = sigma^2 (summed over blocks,
    variance split across blocks proportionally to element count).
    """

    name: str = "problem"
    f_star: float = 0.0
    sigma: float = 0.0
    step_cap: float | None = None

    def __init__(self, blocks: tuple[BlockSpec, ...]):
        self.blocks = blocks

    # --- required interface -------------------------------------------------
    def value(self, params: dict[str, np.ndarray]) -> float:
        raise NotImplementedError

    def gradient(self, params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def initial_params(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    # --- certificates -------------------------------------------------------
    def smoothness(self, params: dict[str, np.ndarray] | None = None) -> dict[str, float]:
        """Certified per-block smoothness constants (may depend on params)."""
        raise MissingCertificate(f"{self.name} provides no per-block smoothness certificate")

    def gl_certificate(self) -> tuple[float, float]:
        """Certified generalized-smoothness pair (l0, l1)."""
        raise MissingCertificate(f"{self.name} provides no generalized-smoothness certificate")

    def initial_gap(self) -> float:
        return self.value(self.initial_params()) - self.f_star

    # --- stochastic model ---------------------------------------------------
    def stochastic_gradient(self, params, seed: int, step: int) -> dict[str, np.ndarray]:
        grads = self.gradient(params)
        if self.sigma == 0.0:
            return grads
        total = sum(s.shape[0] * s.shape[1] for s in self.blocks)
        scale = self.sigma / np.sqrt(total)
        out = {}
        for idx, spec in enumerate(self.blocks):
            rng = np.random.default_rng((_NOISE_SALT, seed, step, idx))
            noise = rng.standard_normal(spec.shape) * scale
            out[spec.name] = frozen(grads[spec.name] + noise, spec.name)
        return out


def stochastic_gradient(problem: Problem, params, seed: int, step: int) -> dict[str, np.ndarray]:
    """Free-function form of Problem.stochastic_gradient."""
    return problem.stochastic_gradient(params, seed, step)


class MatrixQuadratic(Problem):
    """f(X) = 0.5 * ||X - A||_F^2 on one spectral-norm block.

    Gradient differences equal parameter differences, and the nuclear norm of
    any (rows x cols) matrix is at most min(rows, cols) times its spectral
    norm, so L = min(rows, cols) certifies dual-vs-primal smoothness.
    """

    name = "quadratic"
    _SALT = 11

    def __init__(self, rows: int, cols: int, seed: int = 0, target=None, x0=None,
                 sigma: float = 0.0):
        super().__init__((BlockSpec("x", (rows, cols), NormKind.SPECTRAL),))
        rng = np.random.default_rng((self._SALT, seed))
        if target is None:
            target = rng.standard_normal((rows, cols))
        self.target = frozen(np.asarray(target, dtype=np.float64), "target")
        if self.target.shape != (rows, cols):
            raise ShapeMismatch(f"target shape {self.target.shape} != {(rows, cols)}")
        if x0 is None:
            x0 = np.zeros((rows, cols))
        self._x0 = frozen(np.asarray(x0, dtype=np.float64), "x0")
        if self._x0.shape != (rows, cols):
            raise ShapeMismatch(f"x0 shape {self._x0.shape} != {(rows, cols)}")
        self.sigma = float(sigma)
        self.f_star = 0.0

    def value(self, params):
        return 0.5 * float(np.linalg.norm(params["x"] - self.target) ** 2)

    def gradient(self, params):
        return {"x": frozen(params["x"] - self.target, "grad x")}

    def initial_params(self):
        return {"x": self._x0}

    def smoothness(self, params=None):
        return {"x": float(min(self.blocks[0].shape))}


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LogisticRegression(Problem):
    """Binary logistic loss on synthetic linearly separable data with margin.

    The weight block is a (dim, 1) column under the max-entry norm by
    default; block_shape/norm let the same loss run as a matrix block under
    the spectral norm (weights are the row-major flattening of the block).

    Certified smoothness (all derived from the per-sample Hessian bound
    sigmoid' <= 1/4):
      - max-entry geometry: L = mean_i ||x_i||_1^2 / 4  (the l1->linf induced
        norm of the averaged Hessian is at most its entrywise absolute sum);
      - Euclidean: L = lambda_max(X^T X / n) / 4;
      - spectral on an (r, c) block: L = min(r, c) * L_euclidean (the nuclear
        norm of an (r, c) matrix is at most min(r, c) times its spectral
        norm, and primal spectral <= Frobenius).

    noise="minibatch" draws one uniformly random sample per call (unbiased);
    its sigma is the exact per-sample gradient standard deviation at the
    initial point.  noise="additive" uses the base Gaussian model.

    flip > 0 inverts that fraction of labels after construction.  The data
    then stops being separable, so the loss has a finite minimizer and a
    positive floor; f_star stays 0.0, which remains a valid (just no longer
    tight) lower bound wherever an initial gap is needed.
    """

    name = "logistic"
    _SALT = 22

    def __init__(self, dim: int, n_samples: int, seed: int = 0, margin: float = 0.1,
                 block_shape: tuple[int, int] | None = None,
                 norm: NormKind = NormKind.LINF,
                 noise: str = "minibatch", sigma: float = 0.0,
                 flip: float = 0.0):
        if block_shape is None:
            block_shape = (dim, 1)
        if block_shape[0] * block_shape[1] != dim:
            raise ShapeMismatch(f"block_shape {block_shape} does not hold {dim} weights")
        super().__init__((BlockSpec("w", block_shape, norm),))
        if noise not in ("minibatch", "additive"):
            raise ValueError(f"unknown noise mode {noise!r}")
        self.noise = noise
        rng = np.random.default_rng((self._SALT, seed))
        w_true = rng.standard_normal(dim)
        w_true /= np.linalg.norm(w_true)
        features = rng.standard_normal((n_samples, dim))
        # resample rows until every sample clears the margin
        for _ in range(1000):
            gap = features @ w_true
            bad = np.abs(gap) < margin
            if not bad.any():
                break
            features[bad] = rng.standard_normal((int(bad.sum()), dim))
        self.features = frozen(features, "features")
        labels = np.sign(features @ w_true)
        if not 0.0 <= flip < 0.5:
            raise ValueError(f"flip fraction must be in [0, 0.5), got {flip}")
        if flip > 0.0:
            chosen = rng.choice(n_samples, size=int(round(flip * n_samples)), replace=False)
            labels[chosen] = -labels[chosen]
        self.labels = labels
        self.labels.flags.writeable = False
        self._x0 = frozen(np.zeros(block_shape), "x0")
        self.f_star = 0.0  # exact infimum when separable, a lower bound otherwise
        if self.noise == "minibatch":
            per_sample = self._per_sample_grads({"w": self._x0})
            mean = per_sample.mean(axis=0)
            self.sigma = float(np.sqrt(np.mean(np.sum((per_sample - mean) ** 2, axis=1))))
        else:
            self.sigma = float(sigma)

    def _margins(self, params):
        w = np.asarray(params["w"]).ravel()
        return self.labels * (self.features @ w)

    def value(self, params):
        return float(np.mean(np.logaddexp(0.0, -self._margins(params))))

    def gradient(self, params):
        weights = self.labels * _sigmoid(-self._margins(params))
        g = -(self.features.T @ weights) / self.features.shape[0]
        return {"w": frozen(g.reshape(self.blocks[0].shape), "grad w")}

    def _per_sample_grads(self, params):
        weights = self.labels * _sigmoid(-self._margins(params))
        return -self.features * weights[:, None]

    def initial_params(self):
        return {"w": self._x0}

    def smoothness(self, params=None):
        kind = self.blocks[0].norm
        if kind is NormKind.LINF:
            l1_sq = np.sum(np.abs(self.features), axis=1) ** 2
            return {"w": float(np.mean(l1_sq) / 4.0)}
        gram = self.features.T @ self.features / self.features.shape[0]
        l_euclid = float(np.linalg.eigvalsh(gram)[-1] / 4.0)
        if kind is NormKind.EUCLIDEAN:
            return {"w": l_euclid}
        return {"w": float(min(self.blocks[0].shape)) * l_euclid}

    def stochastic_gradient(self, params, seed, step):
        if self.noise == "additive":
            return super().stochastic_gradient(params, seed, step)
        rng = np.random.default_rng((_SAMPLE_SALT, seed, step))
        idx = int(rng.integers(self.features.shape[0]))
        x = self.features[idx]
        margin = self.labels[idx] * float(x @ np.asarray(params["w"]).ravel())
        g = -self.labels[idx] * _sigmoid(np.array([-margin]))[0] * x
        return {"w": frozen(g.reshape(self.blocks[0].shape), "grad w")}


class MatrixFactorization(Problem):
    """f(U, V) = 0.5 * ||U V^T - A||_F^2 with planted rank-r target.

    Two spectral-norm blocks U, V of shape (n, r).  The loss is quartic, so
    no global smoothness constant exists; smoothness(params) returns local
    per-block constants valid for any simultaneous update (P, Q) whose
    spectral norms stay within step_cap:

        f(U+P, V+Q) - f - <R V, P> - <R^T U, Q>
            = <R, P Q^T> + 0.5 * ||P V^T + U Q^T + P Q^T||_F^2
            <= [sqrt(r)||R||_F / 2] (p^2 + q^2)
               + 1.5 [r p^2 ||V||_sp^2 + r q^2 ||U||_sp^2 + r cap^2 (p^2+q^2)/2]

    with p = ||P||_sp, q = ||Q||_sp (using ||P||_F <= sqrt(r) ||P||_sp and
    (a+b+c)^2 <= 3(a^2+b^2+c^2)), giving

        L_U = sqrt(r)||R||_F + 3 r ||V||_sp^2 + 1.5 r cap^2   (L_V symmetric).

    The optimizer clamps adaptive steps to step_cap so the constants stay valid.
    """

    name = "factorization"
    _SALT = 33
    step_cap = 1.0

    def __init__(self, n: int, r: int, seed: int = 0, init_scale: float = 0.5,
                 sigma: float = 0.0):
        super().__init__((
            BlockSpec("u", (n, r), NormKind.SPECTRAL),
            BlockSpec("v", (n, r), NormKind.SPECTRAL),
        ))
        rng = np.random.default_rng((self._SALT, seed))
        planted_u = rng.standard_normal((n, r)) / np.sqrt(r)
        planted_v = rng.standard_normal((n, r)) / np.sqrt(r)
        self.target = frozen(planted_u @ planted_v.T, "target")
        self.f_star = 0.0  # the planted product attains zero loss
        self._u0 = frozen(init_scale * rng.standard_normal((n, r)) / np.sqrt(r), "u0")
        self._v0 = frozen(init_scale * rng.standard_normal((n, r)) / np.sqrt(r), "v0")
        self.sigma = float(sigma)
        self.rank = r

    def _residual(self, params):
        return params["u"] @ params["v"].T - self.target

    def value(self, params):
        return 0.5 * float(np.linalg.norm(self._residual(params)) ** 2)

    def gradient(self, params):
        res = self._residual(params)
        return {
            "u": frozen(res @ params["v"], "grad u"),
            "v": frozen(res.T @ params["u"], "grad v"),
        }

    def initial_params(self):
        return {"u": self._u0, "v": self._v0}

    def smoothness(self, params=None):
        if params is None:
            raise MissingCertificate(
                "factorization smoothness is local; pass the current params"
            )
        res_fro = float(np.linalg.norm(self._residual(params)))
        u_sp = float(np.linalg.norm(params["u"], 2))
        v_sp = float(np.linalg.norm(params["v"], 2))
        r = self.rank
        shared = np.sqrt(r) * res_fro + 1.5 * r * self.step_cap ** 2
        return {
            "u": shared + 3.0 * r * v_sp ** 2,
            "v": shared + 3.0 * r * u_sp ** 2,
        }


class QuarticWell(Problem):
    """f(x) = 0.25 * ||x||_2^4 on one Euclidean block.

    The Hessian is ||x||^2 I + 2 x x^T with top eigenvalue 3||x||^2, which is
    unbounded, so no global smoothness constant exists.  Along any step with
    ||step||_2 <= cap = 1/6 the segment Hessian is at most

        3(||x|| + cap)^2 <= 6||x||^2 + 6 cap^2 <= 6(1 + ||x||^3) + 6 cap^2
                          = (6 + 6 cap^2) + 6 * dual_norm(grad f(x)),

    giving the certified pair (l0, l1) = (6 + 6/36, 6).  The generalized
    step rule's own sizes never exceed 1/l1 = cap, so the pair is valid on
    the whole trajectory regardless of the start point.
    """

    name = "quartic"
    _SALT = 44
    _CAP = 1.0 / 6.0

    def __init__(self, dim: int, seed: int = 0, x0_norm: float = 10.0,
                 sigma: float = 0.0):
        super().__init__((BlockSpec("x", (dim, 1), NormKind.EUCLIDEAN),))
        rng = np.random.default_rng((self._SALT, seed))
        direction = rng.standard_normal((dim, 1))
        direction /= np.linalg.norm(direction)
        self._x0 = frozen(x0_norm * direction, "x0")
        self.f_star = 0.0
        self.sigma = float(sigma)

    def value(self, params):
        return 0.25 * float(np.linalg.norm(params["x"]) ** 4)

    def gradient(self, params):
        x = params["x"]
        return {"x": frozen(float(np.linalg.norm(x) ** 2) * x, "grad x")}

    def initial_params(self):
        return {"x": self._x0}

    def gl_certificate(self):
        return 6.0 + 6.0 * self._CAP ** 2, 6.0


def make_matrix_quadratic(rows: int, cols: int, seed: int = 0, target=None,
                          x0=None, sigma: float = 0.0) -> MatrixQuadratic:
    return MatrixQuadratic(rows, cols, seed=seed, target=target, x0=x0, sigma=sigma)


def make_logistic(dim: int, n_samples: int, seed: int = 0, margin: float = 0.1,
                  block_shape: tuple[int, int] | None = None,
                  norm: NormKind = NormKind.LINF,
                  noise: str = "minibatch", sigma: float = 0.0,
                  flip: float = 0.0) -> LogisticRegression:
    return LogisticRegression(dim, n_samples, seed=seed, margin=margin,
                              block_shape=block_shape, norm=norm,
                              noise=noise, sigma=sigma, flip=flip)


def make_matrix_factorization(n: int, r: int, seed: int = 0, init_scale: float = 0.5,
                              sigma: float = 0.0) -> MatrixFactorization:
    return MatrixFactorization(n, r, seed=seed, init_scale=init_scale, sigma=sigma)


def make_quartic(dim: int, seed: int = 0, x0_norm: float = 10.0,
                 sigma: float = 0.0) -> QuarticWell:
    return QuarticWell(dim, seed=seed, x0_norm=x0_norm, sigma=sigma)
