from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import erf
from scipy.stats import norm

from grankin.constants import (
    ERFINV_HALF,
    TAU_NUMERIC,
    c_star_floor,
    c_star_lower,
    constants_report,
    erfcinv,
    erfinv,
    eta,
    k_norm_bound,
    rho0_paper,
    rho1,
    rho1_lower_bound,
    z_identity_residual,
    z_of_xi,
    z_prime_numerator,
)
from grankin.model import make_params

ERFINV_HALF_MPMATH = 0.47693627620446987338
TAU_MPMATH = 3.3151993441705224282


class TestErfinv:
    def test_zero(self):
        assert erfinv(0.0) == 0.0

    def test_half(self):
        np.testing.assert_allclose(ERFINV_HALF, ERFINV_HALF_MPMATH, rtol=1e-15)
        assert abs(ERFINV_HALF - 0.4769) < 5e-5

    def test_inverse(self):
        p = np.linspace(-0.999999, 0.999999, 2001)
        np.testing.assert_allclose(erf(erfinv(p)), p, atol=1e-12)

    def test_odd(self):
        p = np.array([0.1, 0.6, 0.95])
        np.testing.assert_allclose(erfinv(-p), -erfinv(p), rtol=1e-15)

    @pytest.mark.parametrize("p", [1.0, -1.0, 1.5])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            erfinv(p)

    def test_erfcinv_tail(self):
        from scipy.special import erfc

        y = np.array([1e-300, 1e-100, 1e-20, 1e-5, 0.5, 1.0, 1.7])
        np.testing.assert_allclose(erfc(erfcinv(y)), y, rtol=1e-12)


class TestZ:
    def test_at_zero(self):
        p = make_params(theta1=2.0, m1=0.5)
        np.testing.assert_allclose(z_of_xi(p, 0.0), eta(p), rtol=1e-14)

    def test_eta_is_normal_quantile(self):
        # eta = sqrt(2) erfinv(1/2) for unit background
        np.testing.assert_allclose(eta(make_params()), norm.ppf(0.75), rtol=1e-14)

    def test_identity(self):
        p = make_params(e=0.5)
        assert np.max(np.abs(z_identity_residual(p, np.linspace(0, 10, 1000)))) < 1e-12

    def test_monotone_increasing(self):
        p = make_params()
        xi = np.linspace(0.0, 6.0, 500)
        assert np.all(z_prime_numerator(p, xi) > 0)
        assert np.all(np.diff(z_of_xi(p, xi)) > 0)

    def test_scalar_and_vector_agree(self):
        p = make_params(m1=2.0)
        xi = np.linspace(0.0, 3.0, 17)
        np.testing.assert_allclose([z_of_xi(p, x) for x in xi], z_of_xi(p, xi), rtol=1e-14)

    def test_negative_xi(self):
        with pytest.raises(ValueError):
            z_of_xi(make_params(), -0.1)


class TestRho1:
    def test_small_rho0(self):
        p = make_params()
        np.testing.assert_allclose(rho1(p, 1e-9), eta(p), rtol=1e-9)

    def test_paper_choice_bound(self):
        p = make_params(e=0.5)
        assert rho1(p, rho0_paper(p)) >= 2 * eta(p) / math.sqrt(5) - 1e-10

    def test_brute_force(self):
        p = make_params(e=0.5)
        xs = np.linspace(0.0, 0.3 / (2 * p.kappa), 100_001)
        np.testing.assert_allclose(rho1(p, 0.3), z_of_xi(p, xs).min(), atol=1e-10)
        assert rho1(p, 0.3) > 0

    def test_lower_bound(self):
        p = make_params(m1=3.0, e=0.7)
        for rho0 in np.linspace(0.05, 1.95, 9) * p.kappa * eta(p):
            assert rho1(p, rho0) >= rho1_lower_bound(p, rho0) - 1e-10

    @pytest.mark.parametrize("rho0", [0.0, -1.0, 10.0])
    def test_out_of_range(self, rho0):
        with pytest.raises(ValueError):
            rho1(make_params(), rho0)


class TestCStar:
    def test_unit_background_values(self):
        p = make_params()
        np.testing.assert_allclose(eta(p), 0.6744897501960817, rtol=1e-14)
        np.testing.assert_allclose(c_star_floor(p), 0.6744897501960817 / math.sqrt(5), rtol=1e-14)
        assert c_star_lower(p) >= c_star_floor(p)

    def test_independent_of_restitution(self):
        vals = [c_star_lower(make_params(e=e)) for e in (0.2, 0.6, 1.0)]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-9)


class TestReport:
    def test_tau(self):
        np.testing.assert_allclose(TAU_NUMERIC, TAU_MPMATH, rtol=1e-14)

    def test_fields_below_half(self):
        r = constants_report(make_params(e=0.5))
        d = r.to_dict()
        assert all(v > 0 for k, v in d.items() if isinstance(v, float))
        assert r.provenance["k_norm_bound"] == "analytic-bound"
        np.testing.assert_allclose(r.c_sigma_lower, r.mu_hs_lower / (r.k_norm_bound + r.mu_hs_lower), rtol=1e-14)

    def test_absent_then_measured(self):
        p = make_params()
        assert k_norm_bound(p) is None
        assert constants_report(p).provenance["k_norm_bound"] == "absent"
        r = constants_report(p, measured_k_norm=4.0)
        assert r.provenance["k_norm_bound"] == "measured" and r.k_norm_bound == 4.0
