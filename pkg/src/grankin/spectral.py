"""Point spectrum of the Maxwell-molecules operator.

The eigenvalues of -L_max are

    lambda_{n,l} = 1 - 1/(2 kappa (1-kappa)) * int_{1-2kappa}^1 s^{2n+l+1} P_l(x(s)) ds,
    x(s) = (1 - 2kappa + s^2) / ((2 - 2kappa) s),

indexed by a radial degree n and an angular degree l.  s^l P_l(x(s)) is a
polynomial in s, so the integrand is a polynomial of degree <= 2n+2l+1 and a
Gauss-Legendre rule of sufficient order is exact; the adaptive bisection is a
guard for the large-index / extreme-kappa regime where cancellation grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from grankin.model import ModelParams

ESSENTIAL_SPECTRUM = 1.0
KAPPA_RANGE = (1e-4, 1.0 - 1e-4)
QUAD_TOL = 1e-12
_BASE_ORDER = 64
_MAX_PANELS = 4000
TRUST_TOL = 1e-6


class QuadratureError(RuntimeError):
    """The eigenvalue integral did not converge or produced an inadmissible value."""


def legendre(l: int, x):
    """P_l(x) by the three-term recurrence (k+1)P_{k+1} = (2k+1)x P_k - k P_{k-1}."""
    if l < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if l == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for k in range(1, l):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


@lru_cache(maxsize=None)
def _gauss_rule(order: int):
    return np.polynomial.legendre.leggauss(order)


def _kappa_of(params_or_kappa) -> float:
    if isinstance(params_or_kappa, ModelParams):
        return params_or_kappa.kappa
    return float(params_or_kappa)


def _integrand(kappa: float, n: int, l: int, s: np.ndarray) -> np.ndarray:
    nu = 1.0 - 2.0 * kappa
    x = (nu + s * s) / ((2.0 - 2.0 * kappa) * s)
    # rounding at the endpoints s = nu, s = 1 can push |x| a hair past 1
    near = (np.abs(x) > 1.0) & (np.abs(np.abs(x) - 1.0) <= 1e-14)
    x = np.where(near, np.sign(x), x)
    return s ** (2 * n + l + 1) * legendre(l, x)


def _panel(kappa, n, l, lo, hi):
    """(integral, integral of |f|) over [lo, hi] with the base rule."""
    nodes, weights = _gauss_rule(_BASE_ORDER)
    half = 0.5 * (hi - lo)
    f = _integrand(kappa, n, l, lo + half * (nodes + 1.0))
    return half * float(np.dot(weights, f)), half * float(np.dot(weights, np.abs(f)))


def eigenvalue_integral(kappa: float, n: int, l: int, tol: float = QUAD_TOL) -> tuple[float, float]:
    """int_{1-2kappa}^1 s^{2n+l+1} P_l(x(s)) ds by adaptive Gauss-Legendre.

    Returns (value, error estimate).  A panel is accepted when its two halves
    agree to the local tolerance or to the roundoff floor of the integrand,
    whichever is larger; the floor matters for kappa > 1/2 and large l, where
    the integrand reaches 1e5 while the integral is tiny.
    """
    lo, hi = 1.0 - 2.0 * kappa, 1.0
    # the integral is O(kappa); scale so that lambda itself meets ``tol``
    abs_tol = tol * 2.0 * kappa * (1.0 - kappa)
    whole, whole_abs = _panel(kappa, n, l, lo, hi)
    stack = [(lo, hi, whole, abs_tol)]
    total, err = 0.0, 0.0
    evaluations = 0
    while stack:
        a, b, value, local_tol = stack.pop()
        mid = 0.5 * (a + b)
        left, left_abs = _panel(kappa, n, l, a, mid)
        right, right_abs = _panel(kappa, n, l, mid, b)
        evaluations += 2
        diff = abs(left + right - value)
        floor = 50.0 * np.finfo(float).eps * (left_abs + right_abs)
        if diff <= max(local_tol, floor):
            total += left + right
            err += diff
            continue
        if evaluations > _MAX_PANELS:
            raise QuadratureError(
                f"eigenvalue integral for (n={n}, l={l}) at kappa={kappa} did not converge"
            )
        stack.append((a, mid, left, local_tol / 2))
        stack.append((mid, b, right, local_tol / 2))
    return total, err + 10.0 * np.finfo(float).eps * whole_abs


def eigenvalue(params_or_kappa, n: int, l: int) -> float:
    """lambda_{n,l}, the (n, l) eigenvalue of -L_max; accepts ModelParams or a bare kappa."""
    kappa = _kappa_of(params_or_kappa)
    if n < 0 or l < 0:
        raise ValueError("indices must be nonnegative")
    if not (KAPPA_RANGE[0] <= kappa <= KAPPA_RANGE[1]):
        raise QuadratureError(f"kappa={kappa} outside the supported range {KAPPA_RANGE}")
    if n == 0 and l == 0:
        # mass: the integral equals 2kappa(1-kappa) identically
        return 0.0
    scale = 2.0 * kappa * (1.0 - kappa)
    integral, err = eigenvalue_integral(kappa, n, l)
    if err / scale > TRUST_TOL:
        raise QuadratureError(
            f"roundoff limits lambda_({n},{l}) at kappa={kappa} to {err / scale:.1e}"
        )
    lam = 1.0 - integral / scale
    if not math.isfinite(lam) or lam >= 1.0 or lam < -1e-10:
        raise QuadratureError(f"inadmissible eigenvalue {lam!r} for (n={n}, l={l}), kappa={kappa}")
    return max(lam, 0.0)


def eigenvalue_closed_form_radial(kappa: float, n: int) -> float:
    """lambda_{n,0} = 1 - (1/(n+1)) (1 - nu^{2n+2}) / (1 - nu^2)."""
    nu = 1.0 - 2.0 * kappa
    geometric = sum(nu ** (2 * j) for j in range(n + 1))
    return 1.0 - geometric / (n + 1)


@dataclass
class SpectrumTable:
    kappa: float
    n_max: int
    l_max: int
    entries: dict[tuple[int, int], float] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self.entries[key]

    def __contains__(self, key) -> bool:
        return key in self.entries

    def as_array(self) -> np.ndarray:
        out = np.full((self.n_max + 1, self.l_max + 1), np.nan)
        for (n, l), lam in self.entries.items():
            if n <= self.n_max and l <= self.l_max:
                out[n, l] = lam
        return out

    def rows(self) -> list[tuple[int, int, float]]:
        return [(n, l, self.entries[(n, l)]) for n in range(self.n_max + 1) for l in range(self.l_max + 1)]

    def check_invariants(self, slack: float = 1e-10) -> list[str]:
        """Names of violated invariants (empty when the table is admissible).

        Monotonicity in l is checked everywhere.  Monotonicity in n is only
        checked on the l = 0 column: for l >= 1 it fails once kappa is
        moderate (at kappa = 1/2, lambda_{1,4} = 89/96 < lambda_{0,4} = 15/16),
        see ``n_monotonicity_violations``.
        """
        bad = []
        if self.entries.get((0, 0)) != 0.0:
            bad.append("lambda_00 != 0")
        if any(not (0.0 <= lam < 1.0) for lam in self.entries.values()):
            bad.append("eigenvalue outside [0, 1)")
        for (n, l), lam in self.entries.items():
            up_l = self.entries.get((n, l + 1))
            if up_l is not None and up_l < lam - slack:
                bad.append(f"not monotone in l at ({n},{l})")
            up_n = self.entries.get((n + 1, l))
            if l == 0 and up_n is not None and up_n < lam - slack:
                bad.append(f"not monotone in n at ({n},{l})")
        return bad

    def n_monotonicity_violations(self, slack: float = 1e-10) -> list[tuple[int, int]]:
        """Indices (n, l) with lambda_{n+1,l} < lambda_{n,l}."""
        out = []
        for (n, l), lam in sorted(self.entries.items()):
            up_n = self.entries.get((n + 1, l))
            if up_n is not None and up_n < lam - slack:
                out.append((n, l))
        return out

    def smallest_nonzero(self) -> float:
        return min(lam for key, lam in self.entries.items() if key != (0, 0))


def spectrum_table(params_or_kappa, n_max: int, l_max: int) -> SpectrumTable:
    if n_max < 0 or l_max < 0:
        raise ValueError("window bounds must be nonnegative")
    kappa = _kappa_of(params_or_kappa)
    table = SpectrumTable(kappa=kappa, n_max=n_max, l_max=l_max)
    for n in range(n_max + 1):
        for l in range(l_max + 1):
            table.entries[(n, l)] = eigenvalue(kappa, n, l)
    return table


def recurrence_residual(table: SpectrumTable, n: int, l: int) -> float:
    """|lambda_{n,l+1} - RHS| for the three-term recurrence in l.

    For l = 0 the lambda_{n+1,l-1} term carries the coefficient l/(l+1) = 0
    and is dropped.
    """
    nu = 1.0 - 2.0 * table.kappa
    needed = [(n, l + 1), (n, l), (n + 1, l)] + ([(n + 1, l - 1)] if l >= 1 else [])
    missing = [key for key in needed if key not in table.entries]
    if missing:
        raise KeyError(f"table lacks entries {missing}")
    lam = table.entries
    rhs = (2 * l + 1) / (l + 1) * nu / (1 + nu) * lam[(n, l)]
    rhs += (2 * l + 1) / ((l + 1) * (1 + nu)) * lam[(n + 1, l)]
    if l >= 1:
        rhs -= l / (l + 1) * lam[(n + 1, l - 1)]
    return abs(lam[(n, l + 1)] - rhs)


def spectral_gap_maxwell(params_or_kappa) -> float:
    """mu_max = min(lambda_{0,1}, lambda_{1,0}) = min(kappa, 2 kappa (1-kappa))."""
    kappa = _kappa_of(params_or_kappa)
    return min(kappa, 2.0 * kappa * (1.0 - kappa))
