"""Diffusion limit: cell problem, diffusivities and the rescaled transport equation on a 1D torus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from grankin.collision import (
    OperatorMatrix,
    VelocityGrid,
    _kernel_tag,
    assemble_operator,
    rayleigh_quotient,
)
from grankin.constants import TAU_NUMERIC, c_star_lower
from grankin.model import ModelParams
from grankin.spectral import spectral_gap_maxwell


class CellProblemError(RuntimeError):
    """CG stagnated on the cell problem."""


class DiffusivityBoundError(RuntimeError):
    """The computed diffusivity left its two-sided bounds."""


def _require_centred(params: ModelParams):
    if any(u != 0.0 for u in params.u1):
        raise ValueError("the diffusion limit is set up for u1 = 0")


# ---------------------------------------------------------------------------
# diffusivities


def diffusivity_maxwell(params: ModelParams) -> float:
    """Theta# / (m lambda_{0,1}) with lambda_{0,1} = kappa / mean_free_path."""
    return params.theta_sharp * params.mean_free_path / (params.m * params.kappa)


@dataclass
class CellSolution:
    chi1: np.ndarray
    residual: float
    mean: float
    iterations: int
    kernel: str


def reflect_v1(grid: VelocityGrid, f: np.ndarray) -> np.ndarray:
    """f evaluated at (2 c1 - v1, v2, v3), i.e. mirrored through the grid centre."""
    r = grid.resolution
    return f.reshape(r, r, r)[::-1].reshape(-1)


def solve_cell_problem(params: ModelParams, grid: VelocityGrid | None = None, kernel: str = "hard_sphere",
                       matrix: OperatorMatrix | None = None, x0: np.ndarray | None = None,
                       tol: float = 1e-10, max_iter: int = 5000) -> CellSolution:
    """chi1 with L chi1 = v1 M and zero mass, by Jacobi-preconditioned CG in the W/M metric."""
    _require_centred(params)
    if matrix is None:
        grid = VelocityGrid.for_params(params) if grid is None else grid
        matrix = assemble_operator(params, grid, kernel)
    m_eq = matrix.equilibrium
    w = matrix.grid.cell_volume

    def project(f):
        return f - (f.sum() * w) * m_eq

    def a_op(f):
        return -project(matrix.apply(f))

    b = -project(matrix.grid.nodes[:, 0] * m_eq)
    diag = matrix.loss_rates()
    x = np.zeros_like(b) if x0 is None else project(np.asarray(x0, dtype=float))
    r = b - a_op(x)
    z = project(r / diag)
    p = z.copy()
    rz = matrix.inner(r, z)
    b_norm = matrix.norm(b)
    it = 0
    while matrix.norm(r) > tol * b_norm:
        if it >= max_iter:
            raise CellProblemError(f"CG stalled at relative residual {matrix.norm(r) / b_norm:.2e}")
        ap = a_op(p)
        step = rz / matrix.inner(p, ap)
        x += step * p
        r -= step * ap
        z = project(r / diag)
        rz_new = matrix.inner(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        if it % 50 == 0:
            r = b - a_op(x)  # guard against drift of the recursive residual
    x = project(x)
    rhs = matrix.grid.nodes[:, 0] * m_eq
    residual = matrix.norm(matrix.apply(x) - rhs) / matrix.norm(rhs)
    return CellSolution(x, residual, float(x.sum() * w), it, matrix.kernel)


@dataclass
class DiffusivityReport:
    d_value: float
    d_lower: float
    d_upper: float
    c_hs: float
    kernel: str
    chi_norm_sq: float
    gap_lower: float
    d_upper_floor: float
    cell_residual: float
    within_bounds: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def d_upper_closed_form(params: ModelParams) -> float:
    """Upper bound with C* at its eta/sqrt(5) floor, written through tau."""
    a, b = params.alpha, params.beta
    factor = (1 - a) * (1 - b) / (a * (1 - b) * (1 - a * (1 - b)))
    return TAU_NUMERIC * factor * math.sqrt(params.m1 * params.theta1) / params.m * params.mean_free_path


def diffusivity_hs(params: ModelParams, grid: VelocityGrid | None = None, kernel: str = "hard_sphere",
                   matrix: OperatorMatrix | None = None, cell: CellSolution | None = None,
                   slack: float = 0.01, check: bool = True) -> DiffusivityReport:
    """D = -int v1 chi1 dv with the bounds Theta#/(c_hs m) <= D <= Theta#/(lambda_01 C* m)."""
    _require_centred(params)
    if matrix is None:
        grid = VelocityGrid.for_params(params) if grid is None else grid
        matrix = assemble_operator(params, grid, kernel)
    cell = solve_cell_problem(params, matrix=matrix) if cell is None else cell
    v1 = matrix.grid.nodes[:, 0]
    d_value = -float(np.sum(v1 * cell.chi1) * matrix.grid.cell_volume)
    c_hs = rayleigh_quotient(matrix, v1 * matrix.equilibrium)
    temp = params.theta_sharp / params.m
    mu_max = spectral_gap_maxwell(params) / params.mean_free_path
    lambda01 = params.kappa / params.mean_free_path
    c_star = c_star_lower(params)
    report = DiffusivityReport(
        d_value=d_value,
        d_lower=temp / c_hs,
        d_upper=temp / (lambda01 * c_star),
        c_hs=c_hs,
        kernel=matrix.kernel,
        chi_norm_sq=matrix.inner(cell.chi1, cell.chi1),
        gap_lower=c_star * mu_max,
        d_upper_floor=d_upper_closed_form(params),
        cell_residual=cell.residual,
        within_bounds=False,
    )
    report.within_bounds = report.d_lower * (1 - slack) <= d_value <= report.d_upper * (1 + slack)
    if check and matrix.kernel == "hard_sphere" and not report.within_bounds:
        raise DiffusivityBoundError(
            f"D={d_value:.6g} outside [{report.d_lower:.6g}, {report.d_upper:.6g}]; refine the grid")
    return report


# ---------------------------------------------------------------------------
# periodic heat equation


@dataclass
class DensityField:
    values: np.ndarray
    dx: float

    @property
    def x(self) -> np.ndarray:
        return self.dx * (np.arange(self.values.shape[-1]) + 0.5)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.dx)


def periodic_grid(nx: int) -> np.ndarray:
    return (np.arange(nx) + 0.5) / nx


def cosine_profile(nx: int, amplitude: float = 0.5) -> np.ndarray:
    return 1.0 + amplitude * np.cos(2.0 * math.pi * periodic_grid(nx))


def heat_reference(d: float, rho0: np.ndarray, t: float) -> DensityField:
    """Exact Fourier solution of rho_t = d rho_xx on the unit torus."""
    if d <= 0:
        raise ValueError("diffusivity must be positive")
    rho0 = np.asarray(rho0, dtype=float)
    nx = rho0.size
    k = np.fft.rfftfreq(nx, d=1.0 / nx)
    values = np.fft.irfft(np.fft.rfft(rho0) * np.exp(-d * (2.0 * math.pi * k) ** 2 * t), n=nx)
    return DensityField(values, 1.0 / nx)


def l2_distance(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    return math.sqrt(float(np.sum((a - b) ** 2)) * dx)


# ---------------------------------------------------------------------------
# rescaled kinetic equation


@dataclass
class SymmetryReduction:
    """Orbits of the velocity nodes under the symmetries of the (v2, v3) square.

    With u1 = 0 and initial data rho0(x) M(v) the solution stays invariant
    under these eight maps, so one value per orbit suffices.
    """

    representatives: np.ndarray
    sizes: np.ndarray
    labels: np.ndarray

    @classmethod
    def for_grid(cls, grid: VelocityGrid) -> "SymmetryReduction":
        r = grid.resolution
        i, j, k = np.meshgrid(np.arange(r), np.arange(r), np.arange(r), indexing="ij")
        dj = np.minimum(j, r - 1 - j)
        dk = np.minimum(k, r - 1 - k)
        lo, hi = np.minimum(dj, dk), np.maximum(dj, dk)
        key = ((i * r + lo) * r + hi).reshape(-1)
        uniq, first, labels, sizes = np.unique(key, return_index=True, return_inverse=True, return_counts=True)
        return cls(first, sizes, labels)

    def reduce(self, matrix: np.ndarray) -> np.ndarray:
        """L_red[A, B] = sum over l in B of L[rep_A, l]."""
        rows = matrix[self.representatives]
        out = np.zeros((len(self.representatives), len(self.representatives)))
        np.add.at(out.T, self.labels, rows.T)
        return out

    def expand(self, values: np.ndarray) -> np.ndarray:
        return values[..., self.labels]


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _transport_rhs(f: np.ndarray, speed: np.ndarray, dx: float, second_order: bool) -> np.ndarray:
    """-d/dx (speed f) by upwind finite volumes on the torus; f has shape (nx, nodes)."""
    left, right = np.roll(f, 1, axis=0), np.roll(f, -1, axis=0)
    if second_order:
        slope = _minmod(f - left, right - f)
    else:
        slope = np.zeros_like(f)
    upwind_plus = f + 0.5 * slope                               # face i+1/2 from cell i
    upwind_minus = np.roll(f - 0.5 * slope, -1, axis=0)         # face i+1/2 from cell i+1
    face = np.where(speed > 0, upwind_plus, upwind_minus)
    flux = speed * face
    return -(flux - np.roll(flux, 1, axis=0)) / dx


def _transport(f, speed, dx, dt, second_order):
    """SSP-RK2 step of the transport equation."""
    f1 = f + dt * _transport_rhs(f, speed, dx, second_order)
    return 0.5 * (f + f1 + dt * _transport_rhs(f1, speed, dx, second_order))


@dataclass
class KineticTrace:
    eps: float
    times: np.ndarray
    rho: np.ndarray
    current: np.ndarray
    h_norm: np.ndarray
    dx: float
    dt: float
    mass: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def final(self) -> DensityField:
        return DensityField(self.rho[-1], self.dx)

    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])))

    def continuity_residual(self) -> float:
        """||d_t rho + d_x j|| / ||d_t rho|| with centred differences at interior steps."""
        dt = np.diff(self.times)
        drho = (self.rho[2:] - self.rho[:-2]) / (dt[1:] + dt[:-1])[:, None]
        dj = (np.roll(self.current, -1, axis=1) - np.roll(self.current, 1, axis=1)) / (2.0 * self.dx)
        res = drho + dj[1:-1]
        return float(np.linalg.norm(res) / np.linalg.norm(drho))

    def fick_error(self, d: float, index: int = -1) -> float:
        """||j + D d_x rho|| / ||j|| at a sample."""
        rho, j = self.rho[index], self.current[index]
        grad = (np.roll(rho, -1) - np.roll(rho, 1)) / (2.0 * self.dx)
        return float(np.linalg.norm(j + d * grad) / np.linalg.norm(j))


def solve_rescaled(params: ModelParams, kernel: str, eps: float, rho0: np.ndarray, t_end: float,
                   nx: int | None = None, grid: VelocityGrid | None = None,
                   matrix: OperatorMatrix | None = None, cfl: float = 0.4,
                   second_order: bool = True) -> KineticTrace:
    """Strang splitting of f_t + v1 f_x / eps = L f / eps^2 with f0 = rho0(x) M(v).

    Half transport step, backward-Euler collision step with a once-factored
    matrix, half transport step.  rho and j = (1/eps) int v1 f dv are recorded
    after every step.
    """
    _require_centred(params)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    rho0 = np.asarray(rho0, dtype=float)
    nx = rho0.size if nx is None else nx
    if rho0.size != nx:
        raise ValueError("rho0 length differs from nx")
    if matrix is None:
        grid = VelocityGrid.for_params(params) if grid is None else grid
        matrix = assemble_operator(params, grid, kernel)
    grid = matrix.grid
    sym = SymmetryReduction.for_grid(grid)
    l_red = sym.reduce(matrix.entries)
    reps = sym.representatives
    w = grid.cell_volume
    v1 = grid.nodes[reps, 0]
    m_red = matrix.equilibrium[reps]
    mass_w = sym.sizes * w
    metric = sym.sizes * matrix.inner_product_weights[reps]
    dx = 1.0 / nx
    dt_cfl = cfl * eps * dx / float(np.max(np.abs(v1)))
    steps = max(1, math.ceil(t_end / dt_cfl - 1e-12))
    dt = t_end / steps
    lu = lu_factor(np.eye(len(reps)) - (dt / eps ** 2) * l_red)
    speed = v1 / eps

    f = rho0[:, None] * m_red[None, :]
    rhos, currents, h_norms, masses = [], [], [], []

    def record(state):
        rho = state @ mass_w
        rhos.append(rho)
        currents.append(state @ (mass_w * v1) / eps)
        masses.append(float(rho.sum() * dx))
        h = (state - rho[:, None] * m_red[None, :]) / eps
        h_norms.append(math.sqrt(float(np.sum(h * h * metric)) * dx))

    record(f)
    for _ in range(steps):
        f = _transport(f, speed, dx, 0.5 * dt, second_order)
        f = lu_solve(lu, f.T).T
        f = _transport(f, speed, dx, 0.5 * dt, second_order)
        record(f)
    return KineticTrace(
        eps=eps,
        times=np.linspace(0.0, t_end, steps + 1),
        rho=np.array(rhos),
        current=np.array(currents),
        h_norm=np.array(h_norms),
        dx=dx,
        dt=dt,
        mass=np.array(masses),
        info={"steps": steps, "reduced_nodes": len(reps), "second_order": second_order,
              "cfl_dt": dt_cfl},
    )


@dataclass
class HydroRow:
    eps: float
    error: float
    order: float | None
    diffusivity: float
    mass_drift: float
    continuity_residual: float
    fick_error: float
    h_max: float
    steps: int


@dataclass
class HydroReport:
    kernel: str
    diffusivity: float
    diffusivity_source: str
    rows: list[HydroRow]
    nx: int
    t_end: float

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.rows]

    def strictly_decreasing(self) -> bool:
        e = self.errors
        return all(b < a for a, b in zip(e, e[1:]))


def hydrolimit_report(params: ModelParams, kernel: str, eps_list=(0.5, 0.25, 0.125), nx: int = 128,
                      t_end: float = 0.1, grid: VelocityGrid | None = None,
                      matrix: OperatorMatrix | None = None, rho0: np.ndarray | None = None) -> HydroReport:
    kernel = _kernel_tag(kernel)
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    if matrix is None:
        grid = VelocityGrid.for_params(params) if grid is None else grid
        matrix = assemble_operator(params, grid, kernel)
    if kernel == "maxwell":
        d, source = diffusivity_maxwell(params), "analytic"
    else:
        d, source = diffusivity_hs(params, matrix=matrix).d_value, "cell-problem"
    rho0 = cosine_profile(nx) if rho0 is None else np.asarray(rho0, dtype=float)
    reference = heat_reference(d, rho0, t_end)
    rows: list[HydroRow] = []
    for eps in eps_list:
        tr = solve_rescaled(params, kernel, eps, rho0, t_end, nx, matrix=matrix)
        err = l2_distance(tr.rho[-1], reference.values, tr.dx)
        order = None
        if rows and rows[-1].eps == 2 * eps:
            order = math.log2(rows[-1].error / err)
        rows.append(HydroRow(eps, err, order, d, tr.mass_drift(), tr.continuity_residual(),
                             tr.fick_error(d), float(np.max(tr.h_norm)), tr.info["steps"]))
    return HydroReport(kernel, d, source, rows, nx, t_end)
