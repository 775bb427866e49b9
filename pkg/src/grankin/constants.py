"""Explicit constants of the hard-sphere coercivity chain.

eta = sqrt(2 Theta1/m1) erfinv(1/2) is the radius below which the background
holds half its mass; rho1(rho0) is the minimum of the function z(xi) defined by

    sqrt(a (z^2 + xi^2)) = erfinv(1/2 + erf(sqrt(a) xi) / 2),   a = m1 / (2 Theta1),

over xi in [0, rho0/(2 kappa)], and C* = min(rho0/(2 kappa), rho1/2) transfers
the Maxwell gap to hard spheres: mu_hs >= C* mu_max.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import erf, erfcx

from grankin.model import ModelParams
from grankin.spectral import spectral_gap_maxwell

ERFINV_TOL = 1e-12
RHO0_GRID_SIZE = 33
_SQRT_PI = math.sqrt(math.pi)
_LN2 = math.log(2.0)


_GILES_CENTRAL = (3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 0.00021858087,
                  -0.00125372503, -0.00417768164, 0.246640727, 1.50140941)
_GILES_TAIL = (0.000100950558, 0.00134934322, -0.00367342844, 0.00573950773,
               -0.0076224613, 0.00943887047, 1.00167406, 2.83297682)


def _giles_guess_scalar(p: float, w: float) -> float:
    if w < 5.0:
        w -= 2.5
        q = 2.81022636e-08
        for coef in _GILES_CENTRAL:
            q = coef + q * w
    else:
        w = math.sqrt(w) - 3.0
        q = -0.000200214257
        for coef in _GILES_TAIL:
            q = coef + q * w
    return q * p


def _giles_guess(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Single-precision polynomial guess for erfinv (Giles 2010); w = -log((1-p)(1+p))."""
    central = w < 5.0
    wc = np.where(central, w - 2.5, 0.0)
    pc = 2.81022636e-08
    for coef in _GILES_CENTRAL:
        pc = coef + pc * wc
    wt = np.where(central, 0.0, np.sqrt(np.maximum(w, 5.0)) - 3.0)
    pt = -0.000200214257
    for coef in _GILES_TAIL:
        pt = coef + pt * wt
    return np.where(central, pc, pt) * p


def erfinv(p):
    """Inverse error function by Newton iteration on erf from a rational guess."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p_arr)) or np.any(np.abs(p_arr) >= 1.0):
        raise ValueError("erfinv needs |p| < 1")
    x = _giles_guess(p_arr, -np.log1p(-p_arr * p_arr))
    for _ in range(8):
        step = (erf(x) - p_arr) * (0.5 * _SQRT_PI) * np.exp(x * x)
        x = x - step
        if np.all(np.abs(step) <= 1e-16 * np.maximum(1.0, np.abs(x))):
            break
    return float(x) if np.ndim(x) == 0 else x


def _tail_guess(log_y):
    """x with erfc(x) ~ y from exp(-x^2)/(x sqrt(pi)) ~ y, for tiny y given as log y."""
    x = np.sqrt(-log_y)
    return np.sqrt(-log_y - np.log(x * _SQRT_PI))


def _erfcx_scalar(x: float) -> float:
    if x < 25.0:
        return math.exp(x * x) * math.erfc(x)
    return float(erfcx(x))


_LOG_TAIL = math.log(1e-15)


def _erfcinv_log_scalar(log_y: float) -> float:
    if log_y < _LOG_TAIL:
        x = float(_tail_guess(log_y))
    else:
        y = math.exp(log_y)
        x = _giles_guess_scalar(1.0 - y, -math.log(y * (2.0 - y)))
    for _ in range(12):
        cx = _erfcx_scalar(x)
        step = (math.log(cx) - x * x - log_y) * (-0.5 * _SQRT_PI * cx)
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def erfcinv_log(log_y):
    """x with log erfc(x) = log_y; reaches arguments where erfc underflows."""
    log_y = np.asarray(log_y, dtype=float)
    if np.any(~np.isfinite(log_y)) or np.any(log_y >= math.log(2.0)):
        raise ValueError("erfcinv needs 0 < y < 2")
    if log_y.ndim == 0:
        return _erfcinv_log_scalar(float(log_y))
    y = np.exp(log_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(log_y < _LOG_TAIL, _tail_guess(np.minimum(log_y, _LOG_TAIL)),
                     _giles_guess(1.0 - y, -np.log(y * (2.0 - y))))
    for _ in range(12):
        # Newton on log erfc(x) = log(erfcx(x)) - x^2, well scaled in the far tail
        cx = erfcx(x)
        step = (np.log(cx) - x * x - log_y) * (-0.5 * _SQRT_PI * cx)
        x = x - step
        if np.all(np.abs(step) <= 1e-16 * np.maximum(1.0, np.abs(x))):
            break
    return x


def erfcinv(y):
    """x with erfc(x) = y for y in (0, 2); keeps relative accuracy as y -> 0."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y_arr)) or np.any((y_arr <= 0.0) | (y_arr >= 2.0)):
        raise ValueError("erfcinv needs 0 < y < 2")
    return erfcinv_log(np.log(y_arr))


ERFINV_HALF = erfinv(0.5)
TAU_NUMERIC = math.sqrt(5.0) / (ERFINV_HALF * math.sqrt(2.0))


def _a(params: ModelParams) -> float:
    return params.m1 / (2.0 * params.theta1)


def eta(params: ModelParams) -> float:
    return math.sqrt(2.0 * params.theta1 / params.m1) * ERFINV_HALF


def z_of_xi(params: ModelParams, xi):
    """Nonnegative root z of the defining identity; vectorised over xi >= 0."""
    a = _a(params)
    if np.ndim(xi) == 0:
        xi = float(xi)
        if xi < 0:
            raise ValueError("xi must be nonnegative")
        x = math.sqrt(a) * xi
        r = _erfcinv_log_scalar(math.log(_erfcx_scalar(x)) - x * x - _LN2) / math.sqrt(a)
        radicand = r * r - xi * xi
        if radicand < -1e-12:
            raise ArithmeticError(f"negative radicand {radicand!r} in z(xi)")
        return math.sqrt(max(radicand, 0.0))
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0):
        raise ValueError("xi must be nonnegative")
    # 1/2 + erf(t)/2 = 1 - erfc(t)/2, evaluated through erfcinv to avoid cancellation
    x = math.sqrt(a) * xi_arr
    r = erfcinv_log(np.log(erfcx(x)) - x * x - _LN2) / math.sqrt(a)
    radicand = r * r - xi_arr * xi_arr
    if np.any(radicand < -1e-12):
        raise ArithmeticError(f"negative radicand {np.min(radicand)!r} in z(xi)")
    return np.sqrt(np.maximum(radicand, 0.0))


def z_identity_residual(params: ModelParams, xi) -> np.ndarray:
    """erf(sqrt(a(z^2+xi^2))) - (1/2 + erf(sqrt(a) xi)/2), free of any erfinv call."""
    xi = np.asarray(xi, dtype=float)
    a = _a(params)
    z = np.asarray(z_of_xi(params, xi))
    return erf(np.sqrt(a * (z * z + xi * xi))) - (0.5 + 0.5 * erf(math.sqrt(a) * xi))


def z_prime_numerator(params: ModelParams, xi):
    """z(xi) z'(xi) = sqrt(z^2+xi^2) exp(a z^2)/2 - xi; vanishes at interior critical points."""
    xi = np.asarray(xi, dtype=float)
    z = np.asarray(z_of_xi(params, xi))
    return 0.5 * np.sqrt(z * z + xi * xi) * np.exp(_a(params) * z * z) - xi


def rho1(params: ModelParams, rho0: float, tol: float = 1e-10, grid_points: int = 1025) -> float:
    """min of z over [0, rho0/(2 kappa)]: fine-grid bracketing then golden section."""
    kappa = params.kappa
    if not (0.0 < rho0 < 2.0 * kappa * eta(params)):
        raise ValueError("rho0 must lie in (0, 2 kappa eta)")
    hi = rho0 / (2.0 * kappa)
    xs = np.linspace(0.0, hi, grid_points)
    zs = z_of_xi(params, xs)
    k = int(np.argmin(zs))
    lo_b, hi_b = xs[max(k - 1, 0)], xs[min(k + 1, grid_points - 1)]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi_b - g * (hi_b - lo_b), lo_b + g * (hi_b - lo_b)
    zc, zd = z_of_xi(params, c), z_of_xi(params, d)
    while hi_b - lo_b > tol:
        if zc <= zd:
            hi_b, d, zd = d, c, zc
            c = hi_b - g * (hi_b - lo_b)
            zc = z_of_xi(params, c)
        else:
            lo_b, c, zc = c, d, zd
            d = lo_b + g * (hi_b - lo_b)
            zd = z_of_xi(params, d)
    candidates = [zs[k], zc, zd, z_of_xi(params, lo_b), z_of_xi(params, hi_b)]
    return float(min(candidates))


def rho1_lower_bound(params: ModelParams, rho0: float) -> float:
    e = eta(params)
    return math.sqrt(max(e * e - rho0 * rho0 / (4.0 * params.kappa ** 2), 0.0))


def rho0_paper(params: ModelParams) -> float:
    return 2.0 * params.kappa * eta(params) / math.sqrt(5.0)


def c_star_candidates(params: ModelParams) -> list[tuple[float, float]]:
    """(rho0, min(rho0/(2kappa), rho1/2)) on the log grid plus the fixed choice rho0 = 2 kappa eta/sqrt5."""
    top = 2.0 * params.kappa * eta(params)
    grid = list(top * np.logspace(-3, 0, RHO0_GRID_SIZE, endpoint=False)) + [rho0_paper(params)]
    out = []
    for rho0 in grid:
        out.append((rho0, min(rho0 / (2.0 * params.kappa), rho1(params, rho0) / 2.0)))
    return out


def c_star_lower(params: ModelParams) -> float:
    return max(value for _, value in c_star_candidates(params))


def c_star_floor(params: ModelParams) -> float:
    """eta/sqrt(5), independent of alpha and beta."""
    return eta(params) / math.sqrt(5.0)


def k_norm_bound(params: ModelParams) -> float | None:
    """(2 pi/(1+tau)^2) sqrt(pi Theta1/m1) with tau = (1-2kappa)/kappa; None unless kappa < 1/2."""
    kappa = params.kappa
    tau = (1.0 - 2.0 * kappa) / kappa
    if tau <= 0:
        return None
    return 2.0 * math.pi / (1.0 + tau) ** 2 * math.sqrt(math.pi * params.theta1 / params.m1) / params.mean_free_path


@dataclass
class ConstantsReport:
    erfinv_half: float
    eta: float
    rho0_opt: float
    rho1: float
    rho1_lower: float
    c_star_paper: float
    c_star_lower: float
    c_star_floor: float
    mu_max: float
    mu_hs_lower: float
    k_norm_bound: float | None
    c_sigma_lower: float | None
    tau_numeric: float
    provenance: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def constants_report(params: ModelParams, measured_k_norm: float | None = None) -> ConstantsReport:
    """All constants of the chain; ``measured_k_norm`` fills in for kappa >= 1/2."""
    e = eta(params)
    rho0 = rho0_paper(params)
    r1 = rho1(params, rho0)
    c_star = c_star_lower(params)
    mu_max = spectral_gap_maxwell(params) / params.mean_free_path
    mu_hs = c_star * mu_max
    provenance = {name: "analytic-bound" for name in (
        "erfinv_half", "eta", "rho0_opt", "rho1", "rho1_lower", "c_star_paper", "c_star_lower",
        "c_star_floor", "mu_max", "mu_hs_lower", "tau_numeric")}
    k_norm = k_norm_bound(params)
    if k_norm is not None:
        provenance["k_norm_bound"] = "analytic-bound"
    elif measured_k_norm is not None:
        k_norm = float(measured_k_norm)
        provenance["k_norm_bound"] = "measured"
    else:
        provenance["k_norm_bound"] = "absent"
    c_sigma = None if k_norm is None else mu_hs / (k_norm + mu_hs)
    provenance["c_sigma_lower"] = provenance["k_norm_bound"]
    return ConstantsReport(
        erfinv_half=ERFINV_HALF,
        eta=e,
        rho0_opt=rho0,
        rho1=r1,
        rho1_lower=rho1_lower_bound(params, rho0),
        c_star_paper=min(rho0 / (2.0 * params.kappa), r1 / 2.0),
        c_star_lower=c_star,
        c_star_floor=c_star_floor(params),
        mu_max=mu_max,
        mu_hs_lower=mu_hs,
        k_norm_bound=k_norm,
        c_sigma_lower=c_sigma,
        tau_numeric=TAU_NUMERIC,
        provenance=provenance,
    )
