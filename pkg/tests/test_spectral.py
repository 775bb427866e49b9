from __future__ import annotations

import numpy as np
import pytest

from grankin.model import make_params
from grankin.spectral import (
    QuadratureError,
    SpectrumTable,
    eigenvalue,
    eigenvalue_closed_form_radial,
    legendre,
    recurrence_residual,
    spectral_gap_maxwell,
    spectrum_table,
)

# 40-digit mpmath quadrature of the eigenvalue integral
MPMATH_EIGENVALUES = {
    (0.5, 1, 4): 0.92708333333333333333,   # 89/96
    (0.5, 0, 4): 0.9375,                    # 15/16
    (0.3, 2, 3): 0.78838271999999999211,
    (0.8, 3, 2): 0.91736473600000001688,
    (0.1, 4, 5): 0.6612205865980343018,
    (0.9, 1, 1): 0.86400000000000002398,
}


class TestLegendre:
    def test_base_cases(self):
        assert legendre(0, 0.3) == 1.0
        assert legendre(1, 0.3) == 0.3

    def test_at_one(self):
        for l in range(12):
            np.testing.assert_allclose(legendre(l, 1.0), 1.0, rtol=1e-14)

    def test_cubic(self):
        np.testing.assert_allclose(legendre(3, 0.5), -0.4375, rtol=1e-15)

    def test_matches_numpy(self):
        x = np.linspace(-1.5, 1.5, 31)
        for l in range(9):
            coef = np.zeros(l + 1)
            coef[l] = 1.0
            np.testing.assert_allclose(legendre(l, x), np.polynomial.legendre.legval(x, coef), atol=1e-12)

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            legendre(-1, 0.0)


class TestEigenvalue:
    @pytest.mark.parametrize("key,expected", sorted(MPMATH_EIGENVALUES.items()))
    def test_against_mpmath(self, key, expected):
        kappa, n, l = key
        np.testing.assert_allclose(eigenvalue(kappa, n, l), expected, atol=1e-12)

    def test_mass_mode(self):
        for kappa in (0.01, 0.3, 0.5, 0.99):
            assert eigenvalue(kappa, 0, 0) == 0.0

    def test_momentum_and_energy(self):
        for kappa in np.linspace(0.02, 0.98, 25):
            np.testing.assert_allclose(eigenvalue(kappa, 0, 1), kappa, atol=1e-12)
            np.testing.assert_allclose(eigenvalue(kappa, 1, 0), 2 * kappa * (1 - kappa), atol=1e-12)

    def test_accepts_params(self):
        p = make_params(e=0.5)
        assert eigenvalue(p, 0, 1) == pytest.approx(0.375, abs=1e-12)

    def test_radial_closed_form(self):
        for kappa in (0.2, 0.5, 0.7):
            for n in range(11):
                np.testing.assert_allclose(eigenvalue(kappa, n, 0), eigenvalue_closed_form_radial(kappa, n), atol=1e-12)

    def test_kappa_out_of_range(self):
        with pytest.raises(QuadratureError):
            eigenvalue(1.0, 1, 1)
        with pytest.raises(QuadratureError):
            eigenvalue(0.0, 1, 1)

    def test_extreme_kappa_flagged(self):
        # lambda rounds to 1 in double precision; reported, not returned
        with pytest.raises(QuadratureError):
            eigenvalue(0.99, 0, 6)

    def test_negative_index(self):
        with pytest.raises(ValueError):
            eigenvalue(0.5, -1, 0)


class TestSpectrumTable:
    def test_half_kappa_radial_entries(self):
        t = spectrum_table(0.5, 2, 2)
        np.testing.assert_allclose(t[(1, 0)], 0.5, atol=1e-12)
        np.testing.assert_allclose(t[(2, 0)], 2 / 3, atol=1e-12)
        assert t[(0, 0)] == 0.0

    def test_invariants_hold(self):
        for kappa in (0.05, 0.3, 0.5, 0.8, 0.95):
            assert spectrum_table(kappa, 5, 5).check_invariants() == []

    def test_monotone_in_l_everywhere(self):
        a = spectrum_table(0.7, 6, 6).as_array()
        assert np.all(np.diff(a, axis=1) >= -1e-12)

    def test_monotone_in_n_fails_at_half(self):
        t = spectrum_table(0.5, 2, 5)
        assert (0, 4) in t.n_monotonicity_violations()
        assert t[(1, 4)] < t[(0, 4)]

    def test_monotone_in_n_small_kappa(self):
        assert spectrum_table(0.1, 6, 6).n_monotonicity_violations() == []

    def test_rows_and_gap(self):
        t = spectrum_table(0.3, 3, 3)
        assert len(t.rows()) == 16
        np.testing.assert_allclose(t.smallest_nonzero(), spectral_gap_maxwell(0.3), atol=1e-12)

    def test_detects_bad_table(self):
        bad = SpectrumTable(0.5, 0, 1, {(0, 0): 0.0, (0, 1): 1.2})
        assert bad.check_invariants()

    def test_negative_window(self):
        with pytest.raises(ValueError):
            spectrum_table(0.5, -1, 2)


class TestRecurrence:
    def test_examples(self):
        t = spectrum_table(0.5, 2, 3)
        assert recurrence_residual(t, 0, 1) < 1e-8
        t = spectrum_table(0.3, 4, 5)
        assert recurrence_residual(t, 2, 3) < 1e-8

    def test_l_zero(self):
        t = spectrum_table(0.4, 4, 2)
        for n in range(4):
            assert recurrence_residual(t, n, 0) < 1e-8

    def test_missing_entries(self):
        with pytest.raises(KeyError):
            recurrence_residual(spectrum_table(0.5, 1, 1), 1, 1)


class TestGap:
    @pytest.mark.parametrize("kappa,expected", [(0.5, 0.5), (0.3, 0.3), (0.7, 0.42)])
    def test_branches(self, kappa, expected):
        np.testing.assert_allclose(spectral_gap_maxwell(kappa), expected, rtol=1e-15)
