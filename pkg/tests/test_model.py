from __future__ import annotations

import json
import math

import numpy as np
import pytest

from grankin.model import (
    InvalidParameters,
    Maxwellian,
    background,
    equilibrium,
    eval_maxwellian,
    load_params,
    make_params,
)


class TestMakeParams:
    def test_elastic_equal_mass(self):
        p = make_params()
        assert (p.alpha, p.beta, p.kappa, p.nu, p.theta_sharp) == (0.5, 0.0, 0.5, 0.0, 1.0)

    def test_inelastic_values(self):
        p = make_params(e=0.5)
        assert p.beta == 0.25
        assert p.kappa == 0.375
        np.testing.assert_allclose(p.theta_sharp, 0.6, rtol=1e-15)

    @pytest.mark.parametrize("kwargs", [
        {"e": 0.0}, {"e": 1.5}, {"e": -0.1}, {"m": 0.0}, {"m1": -1.0}, {"theta1": 0.0},
        {"mean_free_path": 0.0}, {"theta1": math.inf}, {"u1": (0.0, 1.0)}, {"u1": (math.nan, 0.0, 0.0)},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidParameters):
            make_params(**kwargs)

    def test_mass_temperature_identity(self):
        p = make_params(m=2.5, m1=0.7, theta1=1.3, e=0.4)
        np.testing.assert_allclose(p.m / p.theta_sharp, (p.m1 / p.theta1) * (1 - p.kappa) / p.kappa, rtol=1e-14)

    def test_round_trip_dict(self):
        p = make_params(m=2.0, u1=(0.1, 0.0, -0.2), e=0.7)
        assert make_params(**p.to_dict()) == p


class TestLoadParams:
    def test_reads_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"m": 2.0, "e": 0.5}))
        p = load_params(path)
        assert p.m == 2.0 and p.e == 0.5 and p.m1 == 1.0

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"mass": 2.0}))
        with pytest.raises(InvalidParameters):
            load_params(path)


class TestMaxwellian:
    def test_peak_value(self):
        mx = Maxwellian(2.0, 0.5, (1.0, 0.0, 0.0))
        np.testing.assert_allclose(mx((1.0, 0.0, 0.0)), (2.0 / (2 * math.pi * 0.5)) ** 1.5)

    def test_reflection_symmetry(self):
        mx = Maxwellian(1.0, 1.3, (0.2, -0.1, 0.4))
        v = np.array([0.9, 0.3, -1.1])
        np.testing.assert_allclose(mx(v), mx(2 * np.array(mx.bulk) - v), rtol=1e-15)

    def test_unit_point(self):
        np.testing.assert_allclose(eval_maxwellian(Maxwellian(1.0, 1.0), (1.0, 0.0, 0.0)),
                                   (2 * math.pi) ** -1.5 * math.exp(-0.5), rtol=1e-15)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameters):
            Maxwellian(1.0, 0.0)


class TestEquilibrium:
    def test_elastic_equal_mass_matches_background(self):
        p = make_params()
        v = np.random.default_rng(0).standard_normal((20, 3))
        np.testing.assert_allclose(equilibrium(p)(v), background(p)(v), rtol=1e-15)

    def test_inelastic_temperature(self):
        np.testing.assert_allclose(equilibrium(make_params(e=0.5)).temperature, 0.6, rtol=1e-15)

    def test_unit_mass(self):
        p = make_params(m=0.4, theta1=2.0, e=0.6, u1=(0.3, 0.0, 0.0))
        sd = math.sqrt(p.equilibrium_variance)
        ax = np.linspace(-8 * sd, 8 * sd, 81)
        h = ax[1] - ax[0]
        v = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3) + p.u1_array
        np.testing.assert_allclose(equilibrium(p)(v).sum() * h ** 3, 1.0, rtol=1e-10)
