import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmopt import (
    MUON_QUINTIC_COEFFS,
    NEWTON_SCHULZ_COEFFS,
    DegenerateGradient,
    ErrorModelParams,
    Normalization,
    NonFiniteValue,
    ParseError,
    PolarKind,
    PolarScheme,
    SchemeDiverged,
    approx_polar,
    apriori_error_bound,
    load_coefficient_table,
    scheme_matmul_count,
)

from oracle_helpers import numpy_polar, spectrum_matrix


class TestPolarScheme:
    def test_newton_schulz_defaults(self):
        s = PolarScheme.newton_schulz()
        assert s.kind is PolarKind.NEWTON_SCHULZ
        assert s.iterations == 5
        assert s.coefficients == (NEWTON_SCHULZ_COEFFS,)

    def test_row_repeats_last(self):
        s = PolarScheme.polynomial([(1.5, -0.5, 0.0), (1.2, -0.2, 0.0)], iterations=5)
        assert s.row(0) == (1.5, -0.5, 0.0)
        assert s.row(1) == (1.2, -0.2, 0.0)
        assert s.row(4) == (1.2, -0.2, 0.0)

    def test_rejects_zero_iterations(self):
        with pytest.raises(ValueError):
            PolarScheme.newton_schulz(0)

    def test_rejects_malformed_row(self):
        with pytest.raises(ValueError):
            PolarScheme.polynomial([(1.0, 0.0)])

    def test_coefficient_sum_warning_is_not_fatal(self, caplog):
        with caplog.at_level(logging.WARNING):
            s = PolarScheme.polynomial([MUON_QUINTIC_COEFFS])
        assert s.coefficients == (MUON_QUINTIC_COEFFS,)
        assert any("sums to" in rec.message for rec in caplog.records)

    def test_classical_coefficients_sum_to_one_silently(self, caplog):
        with caplog.at_level(logging.WARNING):
            PolarScheme.newton_schulz(3)
        assert not caplog.records


class TestErrorModel:
    def test_golden_value(self):
        assert apriori_error_bound(ErrorModelParams(ell=0.5, q=2, p=1)) == pytest.approx(
            0.421875, abs=1e-15)

    def test_perfect_spectrum_has_zero_bound(self):
        assert apriori_error_bound(ErrorModelParams(ell=1.0, q=1, p=3)) == 0.0

    @given(st.floats(0.05, 0.95), st.integers(1, 3), st.integers(1, 6))
    def test_bound_decreases_with_iterations(self, ell, q, p):
        a = apriori_error_bound(ErrorModelParams(ell=ell, q=q, p=p))
        b = apriori_error_bound(ErrorModelParams(ell=ell, q=q, p=p + 1))
        assert b <= a

    def test_validation(self):
        with pytest.raises(ValueError):
            ErrorModelParams(ell=0.0)
        with pytest.raises(ValueError):
            ErrorModelParams(ell=1.5)
        with pytest.raises(ValueError):
            ErrorModelParams(ell=0.5, p=0)


class TestMatmulCount:
    def test_cubic_costs_two_per_iteration(self):
        assert scheme_matmul_count(PolarScheme.newton_schulz(4)) == 8

    def test_quintic_costs_three_per_iteration(self):
        s = PolarScheme.polynomial([MUON_QUINTIC_COEFFS], iterations=4)
        assert scheme_matmul_count(s) == 12

    def test_svd_reference_costs_zero(self):
        assert scheme_matmul_count(PolarScheme.svd_reference()) == 0


class TestApproxPolar:
    @pytest.mark.parametrize("shape", [(8, 8), (12, 5), (5, 12)])
    @pytest.mark.parametrize("normalization", list(Normalization))
    def test_many_iterations_reach_numpy_polar(self, shape, normalization):
        rng = np.random.default_rng(sum(shape))
        m = spectrum_matrix(*shape, rng, 0.3, 1.7)
        scheme = PolarScheme.newton_schulz(40, normalization)
        np.testing.assert_allclose(approx_polar(m, scheme), numpy_polar(m), atol=1e-6)

    def test_svd_reference_matches_numpy(self):
        m = np.random.default_rng(2).standard_normal((7, 4))
        np.testing.assert_allclose(
            approx_polar(m, PolarScheme.svd_reference()), numpy_polar(m), atol=1e-9)

    def test_orthogonal_input_converges_fast(self):
        q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((6, 6)))
        out = approx_polar(q, PolarScheme.newton_schulz(5, Normalization.SPECTRAL))
        assert np.linalg.norm(out - q, 2) <= 1e-6

    @pytest.mark.parametrize("normalization", list(Normalization))
    def test_error_monotone_in_iterations(self, normalization):
        rng = np.random.default_rng(4)
        mats = [spectrum_matrix(24, 16, rng, 0.2, 1.0) for _ in range(10)]
        errs = []
        for iters in (2, 4, 8):
            scheme = PolarScheme.newton_schulz(iters, normalization)
            errs.append(np.mean([
                np.linalg.norm(approx_polar(m, scheme) - numpy_polar(m), 2) for m in mats
            ]))
        assert errs[0] > errs[1] > errs[2]

    @given(st.integers(0, 1000))
    def test_power_of_two_scale_invariance(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((6, 4))
        for normalization in Normalization:
            scheme = PolarScheme.newton_schulz(3, normalization)
            np.testing.assert_array_equal(approx_polar(m, scheme),
                                          approx_polar(4.0 * m, scheme))

    def test_zero_input_degenerate(self):
        with pytest.raises(DegenerateGradient):
            approx_polar(np.zeros((3, 3)), PolarScheme.newton_schulz(2))

    def test_nan_input_rejected(self):
        m = np.full((3, 3), np.nan)
        with pytest.raises(NonFiniteValue):
            approx_polar(m, PolarScheme.newton_schulz(2))

    def test_exploding_coefficients_diverge(self):
        scheme = PolarScheme.polynomial([(25.0, 0.0, 0.0)], iterations=30)
        m = np.random.default_rng(5).standard_normal((4, 4))
        with pytest.raises(SchemeDiverged):
            approx_polar(m, scheme)

    def test_output_within_spectral_guard(self):
        m = np.random.default_rng(6).standard_normal((9, 5))
        out = approx_polar(m, PolarScheme.newton_schulz(1, Normalization.SPECTRAL))
        assert np.linalg.norm(out, 2) <= 10.0 + 1e-9

    def test_wide_input_transposed_consistently(self):
        m = np.random.default_rng(7).standard_normal((4, 11))
        scheme = PolarScheme.newton_schulz(25, Normalization.SPECTRAL)
        np.testing.assert_allclose(approx_polar(m, scheme), numpy_polar(m), atol=1e-5)
        np.testing.assert_allclose(approx_polar(m.T, scheme), numpy_polar(m.T), atol=1e-5)

    def test_a_priori_bound_holds_on_prescribed_spectra(self):
        rng = np.random.default_rng(8)
        for p in (1, 2, 3):
            scheme = PolarScheme.newton_schulz(p, Normalization.SPECTRAL)
            bound = apriori_error_bound(ErrorModelParams(ell=0.5, q=1, p=p))
            for _ in range(5):
                m = spectrum_matrix(12, 8, rng, 0.5, 1.0)
                err = np.linalg.norm(approx_polar(m, scheme) - numpy_polar(m), 2)
                assert err <= bound + 1e-9


class TestCoefficientTable:
    def test_parse_basic(self, tmp_path):
        path = tmp_path / "table.txt"
        path.write_text("# cubic then damped\n1.5 -0.5 0.0\n\n1.2 -0.2 0.0  # trailing comment\n")
        s = load_coefficient_table(path)
        assert s.kind is PolarKind.POLYNOMIAL_TABLE
        assert s.coefficients == ((1.5, -0.5, 0.0), (1.2, -0.2, 0.0))
        assert s.iterations == 2

    def test_iterations_override_repeats_last_row(self, tmp_path):
        path = tmp_path / "table.txt"
        path.write_text("1.5 -0.5 0.0\n")
        s = load_coefficient_table(path, iterations=6)
        assert s.iterations == 6
        assert s.row(5) == (1.5, -0.5, 0.0)

    def test_bad_row_reports_line_number(self, tmp_path):
        path = tmp_path / "table.txt"
        path.write_text("1.5 -0.5 0.0\n1.0 oops 0.0\n")
        with pytest.raises(ParseError) as err:
            load_coefficient_table(path)
        assert "line 2" in str(err.value)

    def test_wrong_arity_reports_line_number(self, tmp_path):
        path = tmp_path / "table.txt"
        path.write_text("\n# header\n1.5 -0.5\n")
        with pytest.raises(ParseError) as err:
            load_coefficient_table(path)
        assert "line 3" in str(err.value)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "table.txt"
        path.write_text("# only comments\n\n")
        with pytest.raises(ParseError):
            load_coefficient_table(path)

    def test_bundled_quintic_table(self):
        s = load_coefficient_table("configs/muon_quintic.txt", iterations=5)
        assert s.coefficients == (MUON_QUINTIC_COEFFS,)
        assert scheme_matmul_count(s) == 15
