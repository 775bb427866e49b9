"""Physical parameters, derived dissipation constants and Maxwellians."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class InvalidParameters(ValueError):
    """Raised for parameters outside the physical range."""


@dataclass(frozen=True)
class ModelParams:
    """Test-particle / background parameters and the constants derived from them.

    ``alpha`` is the mass ratio m1/(m+m1), ``beta`` = (1-e)/2 the inelasticity,
    ``kappa`` = alpha(1-beta) the only combination entering the collision rule,
    ``nu`` = 1-2 kappa, and ``theta_sharp`` the temperature of the unique
    unit-mass equilibrium.
    """

    m: float = 1.0
    m1: float = 1.0
    theta1: float = 1.0
    u1: tuple[float, float, float] = (0.0, 0.0, 0.0)
    e: float = 1.0
    mean_free_path: float = 1.0
    alpha: float = field(init=False)
    beta: float = field(init=False)
    kappa: float = field(init=False)
    nu: float = field(init=False)
    theta_sharp: float = field(init=False)

    def __post_init__(self):
        for name in ("m", "m1", "theta1", "mean_free_path"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidParameters(f"{name} must be positive and finite, got {val!r}")
        if not (0.0 < self.e <= 1.0):
            raise InvalidParameters(f"restitution coefficient must lie in (0, 1], got {self.e!r}")
        u1 = tuple(float(c) for c in self.u1)
        if len(u1) != 3 or not all(math.isfinite(c) for c in u1):
            raise InvalidParameters(f"u1 must be a finite 3-vector, got {self.u1!r}")
        alpha = self.m1 / (self.m + self.m1)
        beta = (1.0 - self.e) / 2.0
        kappa = alpha * (1.0 - beta)
        theta_sharp = (1.0 - alpha) * (1.0 - beta) / (1.0 - kappa) * self.theta1
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "nu", 1.0 - 2.0 * kappa)
        object.__setattr__(self, "theta_sharp", theta_sharp)

    @property
    def u1_array(self) -> np.ndarray:
        return np.asarray(self.u1, dtype=float)

    @property
    def background_variance(self) -> float:
        """Per-component velocity variance Θ1/m1 of the background."""
        return self.theta1 / self.m1

    @property
    def equilibrium_variance(self) -> float:
        """Per-component velocity variance Θ#/m of the equilibrium."""
        return self.theta_sharp / self.m

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "m1": self.m1,
            "theta1": self.theta1,
            "u1": list(self.u1),
            "e": self.e,
            "mean_free_path": self.mean_free_path,
        }


def make_params(m=1.0, m1=1.0, theta1=1.0, u1=(0.0, 0.0, 0.0), e=1.0, mean_free_path=1.0) -> ModelParams:
    return ModelParams(m=m, m1=m1, theta1=theta1, u1=tuple(u1), e=e, mean_free_path=mean_free_path)


def load_params(path) -> ModelParams:
    """Read a JSON config {"m", "m1", "theta1", "u1", "e", "mean_free_path"}; missing keys take defaults."""
    data = json.loads(Path(path).read_text())
    unknown = set(data) - {"m", "m1", "theta1", "u1", "e", "mean_free_path"}
    if unknown:
        raise InvalidParameters(f"unknown config keys: {sorted(unknown)}")
    return make_params(**data)


@dataclass(frozen=True)
class Maxwellian:
    """Unit-density Maxwellian with given particle mass, temperature and bulk velocity."""

    mass: float
    temperature: float
    bulk: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.mass > 0 and self.temperature > 0):
            raise InvalidParameters("Maxwellian needs positive mass and temperature")
        object.__setattr__(self, "bulk", tuple(float(c) for c in self.bulk))

    @property
    def variance(self) -> float:
        return self.temperature / self.mass

    def __call__(self, v):
        return eval_maxwellian(self, v)


def eval_maxwellian(maxwellian: Maxwellian, v):
    """Density at velocity ``v`` (shape (..., 3)); returns an array of shape (...)."""
    v = np.asarray(v, dtype=float)
    c = v - np.asarray(maxwellian.bulk)
    b = maxwellian.mass / (2.0 * maxwellian.temperature)
    return (b / math.pi) ** 1.5 * np.exp(-b * np.sum(c * c, axis=-1))


def background(params: ModelParams) -> Maxwellian:
    """The host-fluid Maxwellian M1."""
    return Maxwellian(params.m1, params.theta1, params.u1)


def equilibrium(params: ModelParams) -> Maxwellian:
    """The dissipative equilibrium M (mass m, temperature Θ#, bulk u1)."""
    return Maxwellian(params.m, params.theta_sharp, params.u1)
