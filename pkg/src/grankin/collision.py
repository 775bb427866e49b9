"""Discrete-velocity linear collision operators for hard spheres and Maxwell molecules.

The collision rule v* = v - 2 kappa (q.n) n, q = v - w, with w drawn from the
background M1, defines a jump process in velocity space.  Integrating out the
partner velocity analytically gives the transition density k(v -> v*).  In
coordinates c = v - u1, with t = |v* - v| and jump direction e = (v* - v)/t,

    k_hs(v -> v*)  = m1D(e.c + t/(2 kappa)) / (4 pi kappa^2 t lambda),
    k_max(v -> v*) = k_hs(v -> v*) * G(|c - (e.c)e|, t/(2 kappa)),

where m1D is the one-dimensional marginal of M1 and G(rho, s) averages
1/sqrt(|c_perp - w_perp|^2 + s^2) over the two-dimensional marginal.  The pair
weights S_il = W^2 M(v_i) k(v_i -> v_l) are symmetric (detailed balance), so

    (L f)_l = (1/W) sum_i S_li (g_i - g_l),   g = f / M,

conserves mass exactly, annihilates M exactly and is self-adjoint and
nonpositive in L^2(M^-1).  The 1/t singularity of k is under-resolved by the
lattice; a nonnegative nearest-neighbour correction restores the exact
second moments of the jumps wherever the collision frequency leaves room.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy import ndimage
from scipy.linalg import eigh
from scipy.special import erf, i0e

from grankin.model import ModelParams, eval_maxwellian, equilibrium

KERNELS = ("maxwell", "hard_sphere")
_BLOCK = 256


def _kernel_tag(kernel: str) -> str:
    aliases = {"maxwell": "maxwell", "max": "maxwell", "hs": "hard_sphere", "hard_sphere": "hard_sphere"}
    try:
        return aliases[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}") from None


# ---------------------------------------------------------------------------
# collision rule and collision frequencies


def post_collision(params: ModelParams, v, w, n):
    """Post-collision velocities (v*, w*) for unit normal(s) n."""
    v, w, n = (np.asarray(x, dtype=float) for x in (v, w, n))
    qn = np.sum((v - w) * n, axis=-1, keepdims=True)
    v_star = v - 2.0 * params.kappa * qn * n
    w_star = w + 2.0 * (1.0 - params.alpha) * (1.0 - params.beta) * qn * n
    return v_star, w_star


def mean_relative_speed(params: ModelParams, c):
    """E|c - w'| for w' ~ N(0, Theta1/m1 I), as a function of |c|."""
    c = np.asarray(c, dtype=float)
    a = params.m1 / (2.0 * params.theta1)
    x = math.sqrt(a) * c
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    closed = ((xs + 0.5 / xs) * erf(xs) + np.exp(-xs * xs) / math.sqrt(math.pi)) / math.sqrt(a)
    # series about 0: (2/sqrt(pi a)) (1 + x^2/3 - x^4/30)
    series = 2.0 / math.sqrt(math.pi * a) * (1.0 + x * x / 3.0 - x ** 4 / 30.0)
    return np.where(small, series, closed)


def collision_frequency(params: ModelParams, kernel: str, v):
    """sigma(v): 1/lambda for Maxwell molecules, E|v - w| / lambda for hard spheres."""
    kernel = _kernel_tag(kernel)
    v = np.asarray(v, dtype=float)
    shape = v.shape[:-1]
    if kernel == "maxwell":
        out = np.full(shape, 1.0 / params.mean_free_path)
    else:
        c = np.linalg.norm(v - params.u1_array, axis=-1)
        out = mean_relative_speed(params, c) / params.mean_free_path
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# velocity grid


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centred cube [-v_max, v_max]^3 around ``center``."""

    resolution: int
    v_max: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.resolution < 2 or self.v_max <= 0:
            raise ValueError("grid needs resolution >= 2 and v_max > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def for_params(cls, params: ModelParams, resolution: int = 16, width: float = 6.0,
                   cover_background: bool = False) -> "VelocityGrid":
        """Cube of half-width ``width`` equilibrium standard deviations.

        With ``cover_background`` the background spread Theta1/m1 is covered
        too; by detailed balance the discrete operator only samples M, so the
        equilibrium spread is enough and keeps the cells small.
        """
        var = params.equilibrium_variance
        if cover_background:
            var = max(var, params.background_variance)
        return cls(resolution, width * math.sqrt(var), params.u1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.v_max / self.resolution

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def size(self) -> int:
        return self.resolution ** 3

    @property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.v_max + h * (np.arange(self.resolution) + 0.5)

    @property
    def nodes(self) -> np.ndarray:
        ax = self.axis
        rel = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        return rel + np.asarray(self.center)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.cell_volume)

    def integrate(self, f) -> float:
        return float(np.sum(f, axis=0) * self.cell_volume) if np.ndim(f) == 1 else np.sum(f, axis=0) * self.cell_volume

    def index(self, i, j, k):
        r = self.resolution
        return (np.asarray(i) * r + np.asarray(j)) * r + np.asarray(k)


def grid_maxwellian(params: ModelParams, grid: VelocityGrid) -> np.ndarray:
    """Equilibrium M sampled at the nodes and renormalised to unit discrete mass."""
    m = eval_maxwellian(equilibrium(params), grid.nodes)
    return m / (m.sum() * grid.cell_volume)


# ---------------------------------------------------------------------------
# transverse average for Maxwell molecules


@lru_cache(maxsize=4)
def _leggauss(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


def g_hat(p, s, nodes: int = 160):
    """Dimensionless G: 2 int_0^inf x/sqrt(x^2+s^2) exp(-(p-x)^2) i0e(2px) dx.

    The substitution sqrt(x^2+s^2) = s + u^2 makes the integrand smooth in u,
    so a single Gauss-Legendre rule reaches machine precision.
    """
    x0, w0 = _leggauss(nodes)
    p = np.asarray(p, dtype=float)[..., None]
    s = np.asarray(s, dtype=float)[..., None]
    u_max = np.sqrt(np.sqrt((p + 9.0) ** 2 + s * s) - s)
    u = 0.5 * u_max * (x0 + 1.0)
    x = u * np.sqrt(2.0 * s + u * u)
    f = np.exp(-(p - x) ** 2) * i0e(2.0 * p * x) * 2.0 * u
    return 2.0 * np.sum(f * (0.5 * u_max * w0), axis=-1)


def _cusp(p, s):
    # G(p, s) = G(p, 0) - 2 exp(-p^2) s + O(s^2); adding this back makes the
    # mirrored table smooth across s = 0
    return 2.0 * np.exp(-p * p) * s * np.exp(-s * s)


class _GTable:
    """Cubic B-spline table of g_hat on a uniform (p, log1p(s)) lattice."""

    P_STEP = 0.025
    T_STEP = 0.02

    def __init__(self, p_max: float, s_max: float):
        p_nodes = np.arange(0.0, p_max + 1.0 + self.P_STEP, self.P_STEP)
        t_nodes = np.arange(0.0, math.log1p(s_max) + 0.5 + self.T_STEP, self.T_STEP)
        s_nodes = np.expm1(t_nodes)
        table = np.vstack([g_hat(pv, s_nodes) + _cusp(pv, s_nodes) for pv in p_nodes])
        self.coef = ndimage.spline_filter(table, order=3, mode="mirror")

    def __call__(self, p: np.ndarray, s: np.ndarray) -> np.ndarray:
        coords = [p.ravel() / self.P_STEP, np.log1p(s.ravel()) / self.T_STEP]
        out = ndimage.map_coordinates(self.coef, coords, order=3, prefilter=False, mode="mirror")
        return out.reshape(p.shape) - _cusp(p, s)


@lru_cache(maxsize=8)
def _g_table(p_max: int, s_max: int) -> _GTable:
    return _GTable(p_max, s_max)


def transverse_average(params: ModelParams, rho, s, table: _GTable | None = None):
    """G(rho, s) = E_{w ~ M1 marginal in 2D} 1/sqrt(|rho - w|^2 + s^2)."""
    sa = math.sqrt(params.m1 / (2.0 * params.theta1))
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    if table is None:
        return sa * g_hat(sa * rho, sa * s)
    return sa * table(sa * rho, sa * s)


# ---------------------------------------------------------------------------
# transition kernel and exact jump moments


class _RateEvaluator:
    """Transition densities k(v_i -> v_l) between grid nodes, block by block."""

    def __init__(self, params: ModelParams, grid: VelocityGrid, kernel: str):
        self.params = params
        self.grid = grid
        self.kernel = _kernel_tag(kernel)
        self.rel = grid.nodes - params.u1_array
        self.a = params.m1 / (2.0 * params.theta1)
        self.table = None
        if self.kernel == "maxwell":
            sa = math.sqrt(self.a)
            reach = math.sqrt(3.0) * grid.v_max + float(np.linalg.norm(np.asarray(grid.center) - params.u1_array))
            p_max = int(math.ceil(sa * reach)) + 1
            s_max = int(math.ceil(sa * 2.0 * math.sqrt(3.0) * grid.v_max / (2.0 * params.kappa))) + 1
            self.table = _g_table(p_max, s_max)

    def block(self, rows: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
        kappa, a = self.params.kappa, self.a
        c = self.rel[rows][:, None, :]
        d = (self.rel if cols is None else self.rel[cols])[None, :, :] - c
        t = np.sqrt(np.sum(d * d, axis=-1))
        zero = t == 0.0
        t_safe = np.where(zero, 1.0, t)
        cn = np.sum(c * d, axis=-1) / t_safe
        r = cn + t_safe / (2.0 * kappa)
        k = math.sqrt(a / math.pi) * np.exp(-a * r * r) / (4.0 * math.pi * kappa ** 2 * t_safe)
        if self.kernel == "maxwell":
            rho = np.sqrt(np.maximum(np.sum(c * c, axis=-1) - cn * cn, 0.0))
            k = k * transverse_average(self.params, rho, t_safe / (2.0 * kappa), self.table)
        k[zero] = 0.0
        return k / self.params.mean_free_path


def exact_jump_second_moment(params: ModelParams, kernel: str, c) -> np.ndarray:
    """B(c) = int k(v -> v*) (v*-v)(v*-v)^T dv* at c = v - u1; shape (..., 3, 3)."""
    kernel = _kernel_tag(kernel)
    c = np.asarray(c, dtype=float)
    kappa2 = params.kappa ** 2 / params.mean_free_path
    T1 = params.background_variance
    eye = np.eye(3)
    if kernel == "maxwell":
        cc = np.sum(c * c, axis=-1)
        return kappa2 * ((cc / 3.0 + 2.0 * T1)[..., None, None] * eye + c[..., :, None] * c[..., None, :])
    # hard spheres: kappa^2 E[|q|^3/3 I + |q| q q^T], q ~ N(c, T1 I); split q along c_hat
    xh, wh = np.polynomial.hermite_e.hermegauss(48)
    wh = wh / math.sqrt(2.0 * math.pi)
    xl, wl = np.polynomial.laguerre.laggauss(32)
    cnorm = np.linalg.norm(c, axis=-1)
    q_par = cnorm[..., None, None] + math.sqrt(T1) * xh[:, None]
    q_perp2 = 2.0 * T1 * xl[None, :]
    weight = wh[:, None] * wl[None, :]
    qabs = np.sqrt(q_par ** 2 + q_perp2)
    e_q3 = np.sum(weight * qabs ** 3, axis=(-2, -1))
    e_par = np.sum(weight * qabs * q_par ** 2, axis=(-2, -1))
    e_perp = 0.5 * np.sum(weight * qabs * q_perp2, axis=(-2, -1))
    safe = np.where(cnorm > 0, cnorm, 1.0)[..., None]
    chat = np.where(cnorm[..., None] > 0, c / safe, 0.0)
    proj = chat[..., :, None] * chat[..., None, :]
    return kappa2 * ((e_q3 / 3.0 + e_perp)[..., None, None] * eye + (e_par - e_perp)[..., None, None] * proj)


# ---------------------------------------------------------------------------
# pair weights and the operator matrix


@dataclass
class MomentCorrection:
    """Nearest-neighbour jump rates gamma[i, a] added in both directions +-e_a."""

    gamma: np.ndarray
    scaled_nodes: int
    lattice_loss: np.ndarray


def _neighbour_pairs(grid: VelocityGrid):
    """(i, l, axis) for every ordered pair of face neighbours inside the cube."""
    r = grid.resolution
    idx = np.arange(grid.size).reshape(r, r, r)
    out = []
    for ax in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, r - 1)
        hi[ax] = slice(1, r)
        i, l = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
        out.append((i, l, ax))
        out.append((l, i, ax))
    return out


def _moment_correction(params, grid, kernel, m_grid, row_blocks) -> MomentCorrection:
    """Fill the second-moment deficit of the lattice jumps with face-neighbour jumps.

    ``row_blocks`` yields (rows, S[rows, :]) of the symmetric pair weights.
    Only nonnegative diagonal deficits are filled, and the added loss rate at
    a node never exceeds sigma(v) minus the lattice loss rate, so the
    corrected operator stays a nonnegative-rate jump process.
    """
    n = grid.size
    w = grid.cell_volume
    h = grid.spacing
    rel = grid.nodes - np.asarray(grid.center)
    lattice_b = np.zeros((n, 3))
    loss = np.zeros(n)
    for rows, block in row_blocks:
        k = block / (w * m_grid[rows])[:, None]
        loss[rows] = k.sum(axis=1)
        for ax in range(3):
            x = rel[:, ax]
            lattice_b[rows, ax] = k @ (x * x) - 2.0 * x[rows] * (k @ x) + x[rows] ** 2 * loss[rows]
    exact = exact_jump_second_moment(params, kernel, grid.nodes - params.u1_array)
    deficit = np.maximum(np.diagonal(exact, axis1=-2, axis2=-1) - lattice_b, 0.0)
    gamma = deficit / (2.0 * h * h)
    added = 2.0 * gamma.sum(axis=1)
    room = np.maximum(collision_frequency(params, kernel, grid.nodes) - loss, 0.0)
    scale = np.where(added > room, room / np.where(added > 0, added, 1.0), 1.0)
    return MomentCorrection(gamma * scale[:, None], int(np.sum(scale < 1.0)), loss)


@dataclass
class OperatorMatrix:
    """Dense matrix of the discretised operator acting on nodal values of f.

    ``inner_product_weights`` are W / M(v_i): <f, g> = sum f g W / M.
    """

    kernel: str
    entries: np.ndarray
    inner_product_weights: np.ndarray
    grid: VelocityGrid
    params: ModelParams
    equilibrium: np.ndarray
    correction: MomentCorrection | None = None
    info: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.entries @ f

    def inner(self, f: np.ndarray, g: np.ndarray):
        w = self.inner_product_weights
        if np.ndim(f) == 2 or np.ndim(g) == 2:
            return np.einsum("i...,i...->...", f * (w if np.ndim(f) == 1 else w[:, None]), g)
        return float(np.sum(f * g * w))

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(self.inner(f, f))

    def mass(self, f: np.ndarray):
        return np.sum(f, axis=0) * self.grid.cell_volume

    def symmetric_entries(self) -> np.ndarray:
        """D^(1/2) L D^(-1/2) with D = diag(W/M): a symmetric matrix with the same spectrum."""
        s = np.sqrt(self.inner_product_weights)
        return s[:, None] * self.entries / s[None, :]

    def loss_rates(self) -> np.ndarray:
        """Discrete collision frequency: -diag(L)."""
        return -np.diagonal(self.entries).copy()

    def pair_weights(self) -> np.ndarray:
        """S_il = W M_i L_li (i != l), the symmetric pair weights."""
        s = self.entries.T * (self.grid.cell_volume * self.equilibrium)[:, None]
        np.fill_diagonal(s, 0.0)
        return s

    def ritz_values(self, count: int = 8) -> np.ndarray:
        """Smallest eigenvalues of -L (the first is the mass mode, ~0)."""
        a = -self.symmetric_entries()
        a = 0.5 * (a + a.T)
        return eigh(a, eigvals_only=True, subset_by_index=[0, count - 1])

    def gain_norm(self) -> float:
        """Operator norm of the gain (off-diagonal) part in L^2(M^-1)."""
        from scipy.sparse.linalg import eigsh

        a = self.symmetric_entries()
        a = 0.5 * (a + a.T)
        np.fill_diagonal(a, 0.0)
        return float(abs(eigsh(a, k=1, which="LM", return_eigenvectors=False)[0]))

    def invariant_residuals(self, rng: np.random.Generator | None = None, samples: int = 4) -> dict:
        """Relative residuals of self-adjointness, negativity, mass and equilibrium invariants."""
        rng = np.random.default_rng(0) if rng is None else rng
        m = self.equilibrium
        f = rng.standard_normal((self.size, samples)) * np.sqrt(m)[:, None]
        g = rng.standard_normal((self.size, samples)) * np.sqrt(m)[:, None]
        lf, lg = self.apply(f), self.apply(g)
        scale = float(np.max(self.loss_rates()))
        nf = np.sqrt(self.inner(f, f))
        ng = np.sqrt(self.inner(g, g))
        self_adj = np.max(np.abs(self.inner(lf, g) - self.inner(f, lg)) / (scale * nf * ng))
        negativity = np.max(self.inner(lf, f) / (scale * nf * nf))
        mass = np.max(np.abs(self.mass(lf)) / (scale * np.sum(np.abs(f), axis=0) * self.grid.cell_volume))
        eq = self.norm(self.apply(m)) / (scale * self.norm(m))
        return {
            "self_adjointness": float(self_adj),
            "negativity": float(max(negativity, 0.0)),
            "mass_conservation": float(mass),
            "equilibrium": float(eq),
        }


def _pair_block(rates: _RateEvaluator, m_grid: np.ndarray, w: float, rows: np.ndarray, cols=None) -> np.ndarray:
    """Symmetrised pair weights S[rows, cols] = W^2 (M_i k(i->l) + M_l k(l->i)) / 2."""
    cols_idx = np.arange(len(m_grid)) if cols is None else cols
    forward = m_grid[rows][:, None] * rates.block(rows, cols)
    backward = (m_grid[cols_idx][:, None] * rates.block(cols_idx, rows)).T
    return 0.5 * w * w * (forward + backward)


def assemble_operator(params: ModelParams, grid: VelocityGrid, kernel: str, correct: bool = True,
                      mass_tol: float = 1e-4) -> OperatorMatrix:
    """Dense Galerkin matrix of the linear collision operator on ``grid``."""
    kernel = _kernel_tag(kernel)
    m_raw = eval_maxwellian(equilibrium(params), grid.nodes)
    captured = m_raw.sum() * grid.cell_volume
    if captured < 1.0 - mass_tol:
        raise ValueError(f"grid captures only {captured!r} of the equilibrium mass; enlarge v_max")
    m_grid = m_raw / captured
    n, w = grid.size, grid.cell_volume
    rates = _RateEvaluator(params, grid, kernel)

    # one-directional weights W^2 M_i k(i->l), then symmetrise in place
    s = np.empty((n, n))
    for start in range(0, n, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n))
        s[rows] = (w * w) * m_grid[rows][:, None] * rates.block(rows)
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        for j0 in range(i0, n, _BLOCK):
            j1 = min(j0 + _BLOCK, n)
            avg = 0.5 * (s[i0:i1, j0:j1] + s[j0:j1, i0:i1].T)
            s[i0:i1, j0:j1] = avg
            s[j0:j1, i0:i1] = avg.T

    correction = None
    if correct:
        blocks = ((np.arange(i0, min(i0 + _BLOCK, n)), s[i0:i0 + _BLOCK]) for i0 in range(0, n, _BLOCK))
        correction = _moment_correction(params, grid, kernel, m_grid, blocks)
        for i, l, ax in _neighbour_pairs(grid):
            c = 0.5 * w * m_grid[i] * correction.gamma[i, ax]
            s[i, l] += c
            s[l, i] += c

    # L[l, i] = S_li / (W M_i), diagonal = -(row sum of S) / (W M_l)
    row = s.sum(axis=1)
    s *= (1.0 / (w * m_grid))[None, :]
    s[np.diag_indices(n)] = -row / (w * m_grid)
    info = {"captured_mass": float(captured)}
    if correction is not None:
        info["scaled_nodes"] = correction.scaled_nodes
    return OperatorMatrix(kernel, s, w / m_grid, grid, params, m_grid, correction, info)


def entropy_production(matrix: OperatorMatrix, f: np.ndarray):
    """D(f) = -<L f, f> in L^2(M^-1); vectorised over columns of f."""
    return -matrix.inner(matrix.apply(f), f)


def symmetric_entropy_production(params: ModelParams, grid: VelocityGrid, kernel: str, f: np.ndarray,
                                 correct: bool = True) -> np.ndarray | float:
    """(1/2) sum_il S_il (g_l - g_i)^2 with kernels re-evaluated pair by pair.

    Every term is nonnegative, so the result is nonnegative by construction.
    ``f`` may be one grid function or a (N, k) batch.
    """
    kernel = _kernel_tag(kernel)
    m_raw = eval_maxwellian(equilibrium(params), grid.nodes)
    m_grid = m_raw / (m_raw.sum() * grid.cell_volume)
    f = np.asarray(f, dtype=float)
    single = f.ndim == 1
    g = (f if not single else f[:, None]) / m_grid[:, None]
    n, w = grid.size, grid.cell_volume
    rates = _RateEvaluator(params, grid, kernel)
    total = np.zeros(g.shape[1])
    for i0 in range(0, n, _BLOCK):
        rows = np.arange(i0, min(i0 + _BLOCK, n))
        for j0 in range(i0, n, _BLOCK):
            cols = np.arange(j0, min(j0 + _BLOCK, n))
            pair = _pair_block(rates, m_grid, w, rows, cols)
            diff2 = (g[rows][:, None, :] - g[cols][None, :, :]) ** 2
            contrib = np.einsum("il,ilk->k", pair, diff2)
            total += contrib if j0 > i0 else 0.5 * contrib
    if correct:
        blocks = ((rows, _pair_block(rates, m_grid, w, rows))
                  for rows in (np.arange(i0, min(i0 + _BLOCK, n)) for i0 in range(0, n, _BLOCK)))
        corr = _moment_correction(params, grid, kernel, m_grid, blocks)
        for i, l, ax in _neighbour_pairs(grid):
            weight = 0.5 * w * m_grid[i] * corr.gamma[i, ax]
            total += np.einsum("i,ik->k", weight, (g[l] - g[i]) ** 2)
    return float(total[0]) if single else total


# ---------------------------------------------------------------------------
# diagnostics on assembled operators


def momentum_mode(matrix: OperatorMatrix, axis: int = 0) -> np.ndarray:
    c = matrix.grid.nodes[:, axis] - matrix.params.u1[axis]
    return c * matrix.equilibrium


def energy_mode(matrix: OperatorMatrix) -> np.ndarray:
    c = matrix.grid.nodes - matrix.params.u1_array
    cc = np.sum(c * c, axis=1)
    mean = np.sum(cc * matrix.equilibrium) / np.sum(matrix.equilibrium)
    return (cc - mean) * matrix.equilibrium


def rayleigh_quotient(matrix: OperatorMatrix, f: np.ndarray) -> float:
    return entropy_production(matrix, f) / matrix.inner(f, f)


def eigen_action_error(matrix: OperatorMatrix, f: np.ndarray, eigenvalue: float) -> float:
    """||L f + eigenvalue f|| / (eigenvalue ||f||) in the weighted norm."""
    return matrix.norm(matrix.apply(f) + eigenvalue * f) / (eigenvalue * matrix.norm(f))


def frequency_fit(params: ModelParams, grid: VelocityGrid) -> tuple[float, float]:
    """(inf, sup) over the nodes of sigma_hs(v) / (1 + |v - u1|)."""
    c = np.linalg.norm(grid.nodes - params.u1_array, axis=1)
    ratio = collision_frequency(params, "hard_sphere", grid.nodes) / (1.0 + c)
    return float(ratio.min()), float(ratio.max())


def comparison_family(matrix: OperatorMatrix, count: int = 20, seed: int = 0) -> list[np.ndarray]:
    """Momentum and energy modes plus ``count`` random smooth perturbations of M."""
    rng = np.random.default_rng(seed)
    m = matrix.equilibrium
    sd = math.sqrt(matrix.params.equilibrium_variance)
    c = (matrix.grid.nodes - matrix.params.u1_array) / sd
    family = [momentum_mode(matrix), energy_mode(matrix)]
    for _ in range(count):
        coef = rng.standard_normal(10)
        g = (coef[0] + c @ coef[1:4] * 0.5 + coef[4] * 0.3 * (np.sum(c * c, axis=1) - 3.0)
             + coef[5] * np.sin(c[:, 0] + coef[6]) + coef[7] * np.cos(0.5 * c[:, 1] * c[:, 2])
             + coef[8] * 0.2 * c[:, 0] * c[:, 1] + coef[9] * 0.1 * c[:, 2] ** 3)
        family.append(g * m)
    return family


@dataclass
class ComparisonReport:
    ratios: list[float | None]
    min_ratio: float
    floor: float
    passed: bool


def verify_comparison(params: ModelParams, grid: VelocityGrid | None = None, family: Iterable[np.ndarray] | None = None,
                      hs: OperatorMatrix | None = None, maxwell: OperatorMatrix | None = None,
                      floor: float | None = None, slack: float = 0.02) -> ComparisonReport:
    """Ratios D_hs(f)/D_max(f) over a family; checks min ratio >= floor (1 - slack)."""
    from grankin.constants import c_star_lower

    grid = VelocityGrid.for_params(params) if grid is None else grid
    hs = assemble_operator(params, grid, "hard_sphere") if hs is None else hs
    maxwell = assemble_operator(params, grid, "maxwell") if maxwell is None else maxwell
    family = comparison_family(maxwell) if family is None else list(family)
    floor = c_star_lower(params) if floor is None else floor
    ratios: list[float | None] = []
    for f in family:
        d_max = entropy_production(maxwell, f)
        ratios.append(None if d_max < 1e-12 else entropy_production(hs, f) / d_max)
    valid = [r for r in ratios if r is not None]
    min_ratio = min(valid) if valid else math.inf
    return ComparisonReport(ratios, min_ratio, floor, min_ratio >= floor * (1.0 - slack))
