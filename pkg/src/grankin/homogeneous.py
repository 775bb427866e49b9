"""Space-homogeneous relaxation df/dt = Q(f) by Galerkin integration and by particles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from grankin.collision import (
    OperatorMatrix,
    VelocityGrid,
    _kernel_tag,
    assemble_operator,
    collision_frequency,
    entropy_production,
    mean_relative_speed,
    post_collision,
)
from grankin.model import Maxwellian, ModelParams, eval_maxwellian


class InstabilityError(RuntimeError):
    """The explicit integrator amplified the solution."""


class MajorantError(RuntimeError):
    """A hard-sphere collision rate exceeded the null-collision majorant."""


class FitError(ValueError):
    """Data do not decay over the fitting window."""


# ---------------------------------------------------------------------------
# initial data


def shifted_maxwellian(params: ModelParams, grid: VelocityGrid | None = None, shift: float = 0.5) -> Maxwellian | np.ndarray:
    """Equilibrium shifted by ``shift`` standard deviations along v1 (unit mass)."""
    sd = math.sqrt(params.equilibrium_variance)
    bulk = (params.u1[0] + shift * sd, params.u1[1], params.u1[2])
    mx = Maxwellian(params.m, params.theta_sharp, bulk)
    return mx if grid is None else _on_grid(mx, grid)


def heated_maxwellian(params: ModelParams, grid: VelocityGrid | None = None, factor: float = 1.5) -> Maxwellian | np.ndarray:
    """Maxwellian at temperature ``factor`` * Theta# (unit mass)."""
    mx = Maxwellian(params.m, factor * params.theta_sharp, params.u1)
    return mx if grid is None else _on_grid(mx, grid)


def _on_grid(mx: Maxwellian, grid: VelocityGrid) -> np.ndarray:
    f = eval_maxwellian(mx, grid.nodes)
    return f / (f.sum() * grid.cell_volume)


# ---------------------------------------------------------------------------
# Galerkin path


def galerkin_dt_limit(matrix: OperatorMatrix) -> float:
    """0.1 (Maxwell) or 0.1/max sigma (hard spheres), and never past 1/max discrete loss."""
    loss = float(np.max(matrix.loss_rates()))
    if matrix.kernel == "maxwell":
        base = 0.1 * matrix.params.mean_free_path
    else:
        base = 0.1 / float(np.max(collision_frequency(matrix.params, "hard_sphere", matrix.grid.nodes)))
    return min(base, 1.0 / loss)


def step_galerkin(matrix: OperatorMatrix, f: np.ndarray, dt: float, check: bool = True) -> np.ndarray:
    """One classical RK4 step of df/dt = L f."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return f.copy()
    L = matrix.entries
    k1 = L @ f
    k2 = L @ (f + 0.5 * dt * k1)
    k3 = L @ (f + 0.5 * dt * k2)
    k4 = L @ (f + dt * k3)
    out = f + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if check:
        m = matrix.equilibrium * matrix.mass(f)
        before, after = matrix.norm(f - m), matrix.norm(out - m)
        if after > before * (1.0 + 1e-6) + 1e-12 * matrix.norm(m):
            raise InstabilityError(f"weighted norm grew from {before:.3e} to {after:.3e} (dt={dt})")
    return out


@dataclass
class RelaxationTrace:
    kernel: str
    method: str
    times: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    l2_dist: np.ndarray
    equilibrium_energy: float
    energy_stderr: np.ndarray | None = None
    momentum_stderr: np.ndarray | None = None
    states: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def rows(self) -> list[tuple]:
        return [
            (t, *p, e, d)
            for t, p, e, d in zip(self.times, self.momentum, self.energy, self.l2_dist)
        ]

    def field(self, name: str) -> np.ndarray:
        """Named scalar series: px, py, pz, momentum (norm), energy, energy_excess, l2dist."""
        if name in ("px", "py", "pz"):
            return self.momentum[:, "xyz".index(name[1])]
        if name == "momentum":
            return np.linalg.norm(self.momentum, axis=1)
        if name == "energy":
            return self.energy
        if name == "energy_excess":
            return np.abs(self.energy - self.equilibrium_energy)
        if name in ("l2dist", "l2_dist"):
            return self.l2_dist
        raise KeyError(name)


def _sample_times(t_end: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, t_end, samples)


def relax_galerkin(matrix: OperatorMatrix, f0: np.ndarray, t_end: float, samples: int = 65,
                   dt: float | None = None, keep_states: bool = False) -> RelaxationTrace:
    params = matrix.params
    if samples < 2:
        raise ValueError("need at least two samples")
    times = _sample_times(t_end, samples)
    limit = galerkin_dt_limit(matrix)
    dt = limit if dt is None else min(dt, limit)
    c = matrix.grid.nodes - params.u1_array
    cc = np.sum(c * c, axis=1)
    w = matrix.grid.cell_volume
    m_eq = matrix.equilibrium
    f = np.asarray(f0, dtype=float).copy()
    mass0 = f.sum() * w
    moms, ens, dists, states = [], [], [], []
    t = 0.0
    for target in times:
        while target - t > 1e-14:
            h = min(dt, target - t)
            f = step_galerkin(matrix, f, h)
            t += h
        mass = f.sum() * w
        moms.append((f @ c) * w / mass)
        ens.append(float(f @ cc) * w / mass)
        dists.append(matrix.norm(f - mass * m_eq))
        if keep_states:
            states.append(f.copy())
    mass_drift = abs(f.sum() * w - mass0)
    return RelaxationTrace(
        kernel=matrix.kernel,
        method="galerkin",
        times=times,
        momentum=np.array(moms),
        energy=np.array(ens),
        l2_dist=np.array(dists),
        equilibrium_energy=float(m_eq @ cc) * w,
        states=np.array(states) if keep_states else None,
        info={"dt": dt, "mass_drift": mass_drift},
    )


def dissipation_identity(matrix: OperatorMatrix, trace: RelaxationTrace) -> tuple[np.ndarray, np.ndarray]:
    """(centred-difference d/dt ||f - M||^2, -2 D(f)) at the interior sample times."""
    if trace.states is None:
        raise ValueError("trace was recorded without states")
    sq = trace.l2_dist ** 2
    t = trace.times
    lhs = (sq[2:] - sq[:-2]) / (t[2:] - t[:-2])
    rhs = np.array([-2.0 * entropy_production(matrix, f) for f in trace.states[1:-1]])
    return lhs, rhs


# ---------------------------------------------------------------------------
# particle path


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; ``stream`` selects an independent replica."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2 ** 64 - 1), int(stream)]))


@dataclass
class ParticleEnsemble:
    velocities: np.ndarray
    rng_seed: int
    time: float = 0.0
    stream: int = 0
    rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        self.velocities = np.array(self.velocities, dtype=float)
        if self.rng is None:
            self.rng = make_rng(self.rng_seed, self.stream)

    @property
    def size(self) -> int:
        return self.velocities.shape[0]

    def copy(self) -> "ParticleEnsemble":
        rng = np.random.Generator(np.random.Philox())
        rng.bit_generator.state = self.rng.bit_generator.state
        return ParticleEnsemble(self.velocities.copy(), self.rng_seed, self.time, self.stream, rng)


def sample_ensemble(maxwellian: Maxwellian, n: int, seed: int, stream: int = 0) -> ParticleEnsemble:
    ens = ParticleEnsemble(np.zeros((n, 3)), seed, 0.0, stream)
    sd = math.sqrt(maxwellian.variance)
    ens.velocities = np.asarray(maxwellian.bulk) + sd * ens.rng.standard_normal((n, 3))
    return ens


def majorant_coefficient(params: ModelParams, safety: float = 1.05) -> float:
    """safety * sup_c sigma_hs(c)/(1+|c|), the sup measured on a fine radial scan."""
    sd = math.sqrt(params.background_variance)
    c = np.concatenate([np.linspace(0.0, 10.0 * sd, 4001), np.geomspace(10.0 * sd, 1e4 * sd, 200)])
    ratio = mean_relative_speed(params, c) / (1.0 + c)
    return safety * float(ratio.max()) / params.mean_free_path


def _random_normals(rng: np.random.Generator, q: np.ndarray) -> np.ndarray:
    """Unit vectors n with density |q_hat . n| / (2 pi) on the sphere."""
    k = q.shape[0]
    qn = np.linalg.norm(q, axis=1, keepdims=True)
    qhat = np.where(qn > 0, q / np.where(qn > 0, qn, 1.0), np.array([0.0, 0.0, 1.0]))
    mu = np.sqrt(rng.random(k)) * np.where(rng.random(k) < 0.5, -1.0, 1.0)
    phi = 2.0 * math.pi * rng.random(k)
    # orthonormal frame around qhat
    helper = np.where(np.abs(qhat[:, :1]) < 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    e1 = np.cross(qhat, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(qhat, e1)
    sin = np.sqrt(np.maximum(1.0 - mu * mu, 0.0))
    return mu[:, None] * qhat + (sin * np.cos(phi))[:, None] * e1 + (sin * np.sin(phi))[:, None] * e2


def _partners_size_biased(params: ModelParams, rng: np.random.Generator, c: np.ndarray) -> np.ndarray:
    """w - u1 with density proportional to |c - w'| M1(w'), by mixture rejection."""
    T1 = params.background_variance
    mean_speed = math.sqrt(8.0 * T1 / math.pi)
    out = np.empty_like(c)
    todo = np.arange(c.shape[0])
    cn_all = np.linalg.norm(c, axis=1)
    while todo.size:
        k = todo.size
        cn = cn_all[todo]
        gauss = math.sqrt(T1) * rng.standard_normal((k, 3))
        r = np.sqrt(2.0 * T1 * rng.gamma(2.0, 1.0, k))
        direction = rng.standard_normal((k, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        use_gauss = rng.random(k) < cn / (cn + mean_speed)
        w = np.where(use_gauss[:, None], gauss, r[:, None] * direction)
        wn = np.linalg.norm(w, axis=1)
        accept = rng.random(k) * (cn + wn) <= np.linalg.norm(c[todo] - w, axis=1)
        out[todo[accept]] = w[accept]
        todo = todo[~accept]
    return out


def _jump(params: ModelParams, rng: np.random.Generator, v: np.ndarray, kernel: str) -> np.ndarray:
    u1 = params.u1_array
    c = v - u1
    if kernel == "maxwell":
        w = math.sqrt(params.background_variance) * rng.standard_normal(v.shape)
    else:
        w = _partners_size_biased(params, rng, c)
    n = _random_normals(rng, c - w)
    v_star, _ = post_collision(params, c, w, n)
    return v_star + u1


def step_particles(params: ModelParams, ensemble: ParticleEnsemble, kernel: str, dt: float,
                   nu_hat: float | None = None) -> ParticleEnsemble:
    """Advance every particle by the exact jump process over [t, t + dt]."""
    kernel = _kernel_tag(kernel)
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    out = ensemble.copy()
    if dt == 0:
        return out
    rng = out.rng
    v = out.velocities
    u1 = params.u1_array
    if kernel == "hard_sphere":
        nu_hat = majorant_coefficient(params) if nu_hat is None else nu_hat
        peak = nu_hat * (1.0 + float(np.max(np.linalg.norm(v - u1, axis=1))))
        if peak * dt > 0.5:
            raise ValueError(f"majorant rate * dt = {peak * dt:.3f} exceeds 0.5")
    remaining = np.full(out.size, dt)
    active = np.arange(out.size)
    while active.size:
        vi = v[active]
        if kernel == "maxwell":
            rate = np.full(active.size, 1.0 / params.mean_free_path)
        else:
            rate = nu_hat * (1.0 + np.linalg.norm(vi - u1, axis=1))
        wait = rng.exponential(1.0, active.size) / rate
        fires = wait < remaining[active]
        remaining[active] -= np.where(fires, wait, remaining[active])
        idx = active[fires]
        if idx.size:
            vj = v[idx]
            if kernel == "maxwell":
                real = np.ones(idx.size, dtype=bool)
            else:
                sigma = collision_frequency(params, "hard_sphere", vj)
                sig_hat = nu_hat * (1.0 + np.linalg.norm(vj - u1, axis=1))
                if np.any(sigma > sig_hat):
                    raise MajorantError("collision rate above majorant; increase nu_hat")
                real = rng.random(idx.size) * sig_hat < sigma
            if np.any(real):
                v[idx[real]] = _jump(params, rng, vj[real], kernel)
        active = idx
    out.time = ensemble.time + dt
    return out


def _ensemble_moments(params: ModelParams, v: np.ndarray):
    c = v - params.u1_array
    cc = np.sum(c * c, axis=1)
    n = c.shape[0]
    return c.mean(axis=0), c.std(axis=0, ddof=1) / math.sqrt(n), cc.mean(), cc.std(ddof=1) / math.sqrt(n)


def relax_particles(params: ModelParams, kernel: str, ensemble: ParticleEnsemble, t_end: float,
                    samples: int = 65, dt: float | None = None, nu_hat: float | None = None) -> RelaxationTrace:
    kernel = _kernel_tag(kernel)
    times = _sample_times(t_end, samples)
    if kernel == "hard_sphere" and nu_hat is None:
        nu_hat = majorant_coefficient(params)
    moms, mom_se, ens, en_se = [], [], [], []
    t = 0.0
    refits = 0
    for target in times:
        while target - t > 1e-14:
            h = target - t if dt is None else min(dt, target - t)
            if kernel == "hard_sphere":
                speed = float(np.max(np.linalg.norm(ensemble.velocities - params.u1_array, axis=1)))
                h = min(h, 0.5 / (nu_hat * (1.0 + speed)))
            try:
                ensemble = step_particles(params, ensemble, kernel, h, nu_hat)
            except MajorantError:
                nu_hat *= 1.5
                refits += 1
                continue
            t += h
        m, ms, e, es = _ensemble_moments(params, ensemble.velocities)
        moms.append(m)
        mom_se.append(ms)
        ens.append(e)
        en_se.append(es)
    return RelaxationTrace(
        kernel=kernel,
        method="particle",
        times=times,
        momentum=np.array(moms),
        energy=np.array(ens),
        l2_dist=np.full(samples, np.nan),
        equilibrium_energy=3.0 * params.equilibrium_variance,
        energy_stderr=np.array(en_se),
        momentum_stderr=np.array(mom_se),
        info={"particles": ensemble.size, "seed": ensemble.rng_seed, "majorant_refits": refits},
    )


def relax_particle_replicas(params: ModelParams, kernel: str, initial: Maxwellian, n: int, replicas: int,
                            seed: int, t_end: float, samples: int = 65) -> RelaxationTrace:
    """Average of independent particle runs (stream r for replica r)."""
    traces = [
        relax_particles(params, kernel, sample_ensemble(initial, n, seed, stream=r), t_end, samples)
        for r in range(replicas)
    ]
    mom = np.mean([tr.momentum for tr in traces], axis=0)
    en = np.mean([tr.energy for tr in traces], axis=0)
    mom_se = np.sqrt(np.sum([tr.momentum_stderr ** 2 for tr in traces], axis=0)) / replicas
    en_se = np.sqrt(np.sum([tr.energy_stderr ** 2 for tr in traces], axis=0)) / replicas
    return RelaxationTrace(
        kernel=traces[0].kernel,
        method="particle",
        times=traces[0].times,
        momentum=mom,
        energy=en,
        l2_dist=np.full(len(traces[0].times), np.nan),
        equilibrium_energy=traces[0].equilibrium_energy,
        energy_stderr=en_se,
        momentum_stderr=mom_se,
        info={"particles": n, "replicas": replicas, "seed": seed},
    )


def relax(params: ModelParams, kernel: str, method: str, initial, t_end: float, samples: int = 65,
          grid: VelocityGrid | None = None, matrix: OperatorMatrix | None = None, **kwargs) -> RelaxationTrace:
    """Dispatch to the Galerkin or particle solver.

    ``initial`` is a grid function (Galerkin), a ParticleEnsemble (particles)
    or a Maxwellian, which is sampled on the grid or into particles.
    """
    kernel = _kernel_tag(kernel)
    if samples < 64:
        raise ValueError("traces are sampled at 64 or more time points")
    if method == "galerkin":
        if matrix is None:
            grid = VelocityGrid.for_params(params) if grid is None else grid
            matrix = assemble_operator(params, grid, kernel)
        f0 = _on_grid(initial, matrix.grid) if isinstance(initial, Maxwellian) else initial
        if abs(matrix.mass(f0) - 1.0) > 1e-8:
            raise ValueError("initial state must have unit mass")
        return relax_galerkin(matrix, f0, t_end, samples, **kwargs)
    if method == "particle":
        if isinstance(initial, Maxwellian):
            initial = sample_ensemble(initial, kwargs.pop("particles", 100_000), kwargs.pop("seed", 0))
        return relax_particles(params, kernel, initial, t_end, samples, **kwargs)
    raise ValueError(f"unknown method {method!r}")


def fit_rate(trace_or_times, field_or_values, window: tuple[float, float] = (1e-6, 0.5)) -> float:
    """Positive decay rate from a least-squares fit of log(field) over the window.

    The window keeps samples whose value lies in [lo, hi] times the initial value.
    Residuals are weighted by the value itself, the inverse standard deviation
    of log(field) under additive noise.
    """
    if isinstance(trace_or_times, RelaxationTrace):
        times = trace_or_times.times
        values = trace_or_times.field(field_or_values)
    else:
        times = np.asarray(trace_or_times, dtype=float)
        values = np.asarray(field_or_values, dtype=float)
    v0 = values[0]
    if not (v0 > 0):
        raise FitError("initial value must be positive")
    lo, hi = window
    keep = (values >= lo * v0) & (values <= hi * v0) & (values > 0)
    if np.count_nonzero(keep) < 3:
        raise FitError("fewer than three samples in the fitting window")
    slope = np.polyfit(times[keep], np.log(values[keep]), 1, w=values[keep])[0]
    if not slope < 0:
        raise FitError("data do not decay")
    return float(-slope)
