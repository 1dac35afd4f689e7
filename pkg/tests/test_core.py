import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmopt import (
    NonFiniteValue,
    NormKind,
    ParamBlock,
    ShapeMismatch,
    as_matrix,
    dual_norm,
    norm_compat_rho,
    primal_norm,
)

from oracle_helpers import sampled_dual_lower_bound


class TestAsMatrix:
    def test_vector_becomes_column(self):
        m = as_matrix([1.0, 2.0, 3.0])
        assert m.shape == (3, 1)
        assert m.dtype == np.float64

    def test_matrix_passthrough_values(self):
        src = [[1, 2], [3, 4]]
        m = as_matrix(src)
        assert m.shape == (2, 2)
        np.testing.assert_array_equal(m, np.array(src, dtype=float))

    def test_result_is_read_only(self):
        m = as_matrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            m[0, 0] = 9.0

    def test_rejects_3d(self):
        with pytest.raises(ShapeMismatch):
            as_matrix(np.zeros((2, 2, 2)))

    def test_rejects_nan_and_inf(self):
        with pytest.raises(NonFiniteValue):
            as_matrix([[np.nan, 1.0]])
        with pytest.raises(NonFiniteValue):
            as_matrix([[np.inf, 1.0]])


class TestParamBlock:
    def test_holds_frozen_matrix(self):
        b = ParamBlock("w", [[1.0, 2.0], [3.0, 4.0]], NormKind.SPECTRAL)
        assert b.value.shape == (2, 2)
        with pytest.raises(ValueError):
            b.value[0, 0] = 0.0

    def test_vector_block_is_column(self):
        b = ParamBlock("w", [1.0, 2.0], NormKind.LINF)
        assert b.value.shape == (2, 1)


class TestNormGoldenValues:
    def test_spectral_of_diag(self):
        g = np.diag([2.0, 3.0])
        assert primal_norm(g, NormKind.SPECTRAL) == pytest.approx(3.0, abs=1e-12)

    def test_nuclear_dual_of_diag(self):
        g = np.diag([2.0, 3.0])
        assert dual_norm(g, NormKind.SPECTRAL) == pytest.approx(5.0, abs=1e-12)

    def test_linf_pair(self):
        g = np.array([1.0, -2.0, 3.0])
        assert primal_norm(g, NormKind.LINF) == pytest.approx(3.0)
        assert dual_norm(g, NormKind.LINF) == pytest.approx(6.0)

    def test_euclidean_self_dual(self):
        g = np.array([[1.0, 2.0], [3.0, 4.0]])
        expect = float(np.sqrt(30.0))
        assert primal_norm(g, NormKind.EUCLIDEAN) == pytest.approx(expect, rel=1e-14)
        assert dual_norm(g, NormKind.EUCLIDEAN) == pytest.approx(expect, rel=1e-14)

    def test_spectral_of_column_is_l2(self):
        g = np.array([[3.0], [4.0]])
        assert primal_norm(g, NormKind.SPECTRAL) == pytest.approx(5.0, rel=1e-14)
        assert dual_norm(g, NormKind.SPECTRAL) == pytest.approx(5.0, rel=1e-14)


class TestNormCrossChecks:
    """Dual norms against routes that do not share code with the package."""

    @pytest.mark.parametrize("seed", range(5))
    def test_nuclear_vs_numpy_svdvals(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((7, 4))
        assert dual_norm(g, NormKind.SPECTRAL) == pytest.approx(
            float(np.linalg.svd(g, compute_uv=False).sum()), rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_l1_vs_direct_sum(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((6, 3))
        assert dual_norm(g, NormKind.LINF) == pytest.approx(float(np.abs(g).sum()), rel=1e-14)

    @pytest.mark.parametrize("kind", list(NormKind))
    def test_sampled_maximization_never_beats_dual(self, kind):
        rng = np.random.default_rng(7)
        g = rng.standard_normal((5, 4))
        sampled = sampled_dual_lower_bound(g, kind, rng, trials=2000)
        assert sampled <= dual_norm(g, kind) * (1.0 + 1e-9)

    @given(st.integers(0, 10_000), st.sampled_from(list(NormKind)))
    def test_pairing_inequality(self, seed, kind):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((4, 3))
        d = rng.standard_normal((4, 3))
        pairing = abs(float(np.sum(g * d)))
        assert pairing <= primal_norm(d, kind) * dual_norm(g, kind) * (1.0 + 1e-9) + 1e-12

    @given(st.integers(0, 10_000), st.sampled_from(list(NormKind)))
    def test_homogeneity_and_triangle(self, seed, kind):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((3, 5))
        b = rng.standard_normal((3, 5))
        assert primal_norm(2.5 * a, kind) == pytest.approx(2.5 * primal_norm(a, kind), rel=1e-10)
        assert primal_norm(a + b, kind) <= primal_norm(a, kind) + primal_norm(b, kind) + 1e-9


class TestNormCompatRho:
    def test_golden_values(self):
        assert norm_compat_rho(NormKind.SPECTRAL, (4, 9)) == pytest.approx(2.0)
        assert norm_compat_rho(NormKind.LINF, (4, 9)) == pytest.approx(6.0)
        assert norm_compat_rho(NormKind.EUCLIDEAN, (4, 9)) == pytest.approx(1.0)

    def test_spectral_square(self):
        assert norm_compat_rho(NormKind.SPECTRAL, (3, 3)) == pytest.approx(np.sqrt(3.0))

    @given(st.integers(0, 10_000), st.sampled_from(list(NormKind)),
           st.integers(1, 6), st.integers(1, 6))
    def test_rho_dominates_dual_over_frobenius(self, seed, kind, rows, cols):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((rows, cols))
        fro = float(np.linalg.norm(g))
        assert dual_norm(g, kind) <= norm_compat_rho(kind, (rows, cols)) * fro * (1 + 1e-9)
