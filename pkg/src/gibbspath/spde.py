"""Lattice integrators for the dissipative stochastic dynamics
dX = (Lap_h X - grad~U(X)) dt/2 + dB with space-time white noise.

Schemes: ``split_prox`` (default) alternates an implicit heat half-step,
(I - (dt/2) Lap_h) X* = X + xi, with an exact backward-Euler drift step
realized as a proximal map of the full potential; it is unconditionally
dissipative for convex-plus-quadratic interactions, including discontinuous
minimal-section drifts.  ``explicit`` and ``yosida`` use plain Euler steps
(the latter with the Lipschitz regularized drift) and are restricted to
dt <= h^2/2.

Weighted norms use rho(x) = exp(-2 r chi(x)) with the fixed cutoff
chi(x) = (3 + 6x^2 - x^4)/8 on [-1, 1] and |x| outside (symmetric, positive,
convex, C^2); contraction rates in this norm lose 2 r^2 against the flat one.

The exactly invariant finite-volume field measure
pi(dx) ~ exp(-sum_bonds (x_{i+1}-x_i)^2/(2h) - h sum_i U(x_i)) prod dx_i
is sampled by forward-filter backward-sampling of the nearest-neighbour
transfer operator on a discretized site space.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, replace
from scipy.linalg import solveh_banded
from scipy.stats import ks_2samp

from . import convex, potentials
from .potentials import PotentialSpec


class StabilityError(ValueError):
    """Explicit scheme asked to run outside its stability region."""


class InsufficientReplicasError(ValueError):
    """Requested tolerance is below the statistical resolution of the test."""


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def chi(x):
    """Fixed cutoff: (3 + 6x^2 - x^4)/8 on [-1,1], |x| outside; C^2, convex."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.where(ax >= 1.0, ax, (3.0 + 6.0 * x * x - x ** 4) / 8.0)
    return out if out.ndim else float(out)


def rho(x, rate: float):
    """Weight exp(rate * chi(x))."""
    out = np.exp(rate * np.asarray(chi(x)))
    return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class WeightSpec:
    """Weight rate r and semigroup shift kappa; requires kappa > 2 r^2."""

    r: float
    kappa: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if self.kappa <= 2.0 * self.r ** 2:
            raise ValueError(f"kappa must exceed 2 r^2 = {2 * self.r ** 2}")

    def weight(self, x):
        """The E-norm density rho_{-2r}(x)."""
        return rho(x, -2.0 * self.r)


# ---------------------------------------------------------------------------
# lattice state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeGrid:
    """Uniform sites on [-half_width, half_width]; Neumann keeps endpoints."""

    half_width: float
    n_sites: int
    boundary: str = "neumann"

    def __post_init__(self):
        if self.boundary not in ("neumann", "dirichlet"):
            raise ValueError("boundary must be 'neumann' or 'dirichlet'")
        if self.n_sites < 1:
            raise ValueError("need at least 1 site")

    @property
    def spacing(self) -> float:
        if self.boundary == "neumann":
            if self.n_sites == 1:
                return 2.0 * self.half_width
            return 2.0 * self.half_width / (self.n_sites - 1)
        return 2.0 * self.half_width / (self.n_sites + 1)

    def points(self) -> np.ndarray:
        if self.boundary == "neumann":
            if self.n_sites == 1:
                return np.zeros(1)
            return -self.half_width + self.spacing * np.arange(self.n_sites)
        return -self.half_width + self.spacing * np.arange(1, self.n_sites + 1)


@dataclass
class LatticeField:
    grid: LatticeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.grid.n_sites:
            raise ValueError("values length must match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite field values")


def zero_field(grid: LatticeGrid) -> LatticeField:
    return LatticeField(grid=grid, values=np.zeros(grid.n_sites))


@dataclass(frozen=True)
class NoisePath:
    """Seeded space-time white-noise increments, variance dt/h per site-step."""

    seed: int
    dt: float
    n_steps: int
    grid: LatticeGrid

    def scale(self) -> float:
        return float(np.sqrt(self.dt / self.grid.spacing))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed))


@dataclass(frozen=True)
class SpdeConfig:
    dt: float
    t_final: float
    drift_mode: str = "split_prox"
    alpha: float | None = None
    weight: WeightSpec = WeightSpec(r=0.1, kappa=0.5)
    save_every: int | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.t_final < 0:
            raise ValueError("dt must be positive and t_final nonnegative")
        if self.drift_mode not in ("split_prox", "explicit", "yosida"):
            raise ValueError(f"unknown drift mode {self.drift_mode!r}")
        if self.drift_mode == "yosida" and (self.alpha is None or self.alpha <= 0):
            raise ValueError("yosida mode needs a positive alpha")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_final / self.dt))
        if abs(n * self.dt - self.t_final) > 1e-9 * max(self.t_final, 1.0):
            raise ValueError("t_final must be an integer multiple of dt")
        return n


def laplacian(values: np.ndarray, grid: LatticeGrid) -> np.ndarray:
    """Discrete Laplacian along the last axis; mirror or zero ghosts."""
    h2 = grid.spacing ** 2
    v = values
    if grid.n_sites == 1:
        return np.zeros_like(v) if grid.boundary == "neumann" else -2.0 * v / h2
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h2
    if grid.boundary == "neumann":
        out[..., 0] = (v[..., 1] - v[..., 0]) / h2
        out[..., -1] = (v[..., -2] - v[..., -1]) / h2
    else:
        out[..., 0] = (v[..., 1] - 2.0 * v[..., 0]) / h2
        out[..., -1] = (v[..., -2] - 2.0 * v[..., -1]) / h2
    return out


def _heat_solver(grid: LatticeGrid, dt: float):
    """Banded Cholesky solve of (I - (dt/2) Lap_h) X = rhs."""
    n, h2 = grid.n_sites, grid.spacing ** 2
    c = 0.5 * dt / h2
    diag = np.full(n, 1.0 + 2.0 * c)
    if grid.boundary == "neumann":
        diag[0] = diag[-1] = 1.0 + c
    ab = np.zeros((2, n))
    ab[0, 1:] = -c
    ab[1] = diag

    def solve(rhs):
        flat = rhs.T if rhs.ndim == 2 else rhs
        out = solveh_banded(ab, flat)
        return out.T if rhs.ndim == 2 else out

    return solve


def _check_explicit_stability(cfg: SpdeConfig, grid: LatticeGrid):
    if cfg.dt > grid.spacing ** 2 / 2 + 1e-15:
        raise StabilityError(
            f"explicit diffusion needs dt <= h^2/2 = {grid.spacing ** 2 / 2:.3e}")


def _advance(values, spec, cfg, grid, xi, heat_solve):
    """One step of the configured scheme on raw arrays (last axis = sites)."""
    if cfg.drift_mode == "split_prox":
        star = heat_solve(values + xi)
        return convex.prox_full_potential(spec, cfg.dt / 2.0, star)
    if cfg.drift_mode == "explicit":
        gradu = np.asarray(potentials.min_section_grad(spec, values))
    else:
        p = convex.ProxProblem(spec, cfg.alpha)
        gradu = spec.k1 * values + np.asarray(convex.yosida_grad(p, values))
    return values + 0.5 * cfg.dt * (laplacian(values, grid) - gradu) + xi


def step(state: LatticeField, spec: PotentialSpec, cfg: SpdeConfig,
         noise_increment) -> LatticeField:
    """Advance one time step; ``noise_increment`` has variance dt/h per site."""
    grid = state.grid
    if cfg.drift_mode != "split_prox":
        _check_explicit_stability(cfg, grid)
    xi = np.asarray(noise_increment, dtype=float)
    heat_solve = _heat_solver(grid, cfg.dt) if cfg.drift_mode == "split_prox" else None
    return LatticeField(grid=grid, values=_advance(state.values, spec, cfg, grid, xi, heat_solve))


@dataclass
class Trajectory:
    times: np.ndarray
    fields: np.ndarray      # (n_saved, n_sites)
    grid: LatticeGrid


def evolve(w0: LatticeField, spec: PotentialSpec, cfg: SpdeConfig,
           noise: NoisePath) -> Trajectory:
    """Deterministic function of (w0, noise, cfg): the full trajectory."""
    grid = w0.grid
    if noise.grid != grid or abs(noise.dt - cfg.dt) > 0:
        raise ValueError("noise path does not match the configuration")
    n_steps = cfg.n_steps
    if noise.n_steps < n_steps:
        raise ValueError("noise path shorter than t_final/dt")
    if cfg.drift_mode != "split_prox":
        _check_explicit_stability(cfg, grid)
    every = cfg.save_every or max(1, n_steps // 200)
    heat_solve = _heat_solver(grid, cfg.dt) if cfg.drift_mode == "split_prox" else None

    rng = noise.generator()
    scale = noise.scale()
    vals = w0.values.copy()
    times = [0.0]
    saved = [vals.copy()]
    for k in range(1, n_steps + 1):
        xi = rng.normal(0.0, scale, size=grid.n_sites)
        vals = _advance(vals, spec, cfg, grid, xi, heat_solve)
        if k % every == 0 or k == n_steps:
            times.append(k * cfg.dt)
            saved.append(vals.copy())
    return Trajectory(times=np.asarray(times), fields=np.asarray(saved), grid=grid)


def evolve_ensemble(w0_values: np.ndarray, spec: PotentialSpec, cfg: SpdeConfig,
                    grid: LatticeGrid, seed: int, snapshot_times,
                    chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Evolve (n_rep, n_sites) initial data with per-replica noise streams.

    Streams derive from SeedSequence(seed).spawn(replica), so two ensembles
    with identical seeds see identical noise (common-random-numbers coupling).
    Returns (times, array of shape (n_times, n_rep, n_sites)).
    """
    w0_values = np.atleast_2d(np.asarray(w0_values, dtype=float))
    n_rep = w0_values.shape[0]
    n_steps = cfg.n_steps
    snap_idx = sorted({int(round(t / cfg.dt)) for t in snapshot_times})
    if any(not 0 <= i <= n_steps for i in snap_idx):
        raise ValueError("snapshot times outside [0, t_final]")
    if cfg.drift_mode != "split_prox":
        _check_explicit_stability(cfg, grid)
    heat_solve = _heat_solver(grid, cfg.dt) if cfg.drift_mode == "split_prox" else None
    scale = float(np.sqrt(cfg.dt / grid.spacing))

    children = np.random.SeedSequence(seed).spawn(n_rep)
    out = np.empty((len(snap_idx), n_rep, grid.n_sites))
    for c0 in range(0, n_rep, chunk):
        c1 = min(c0 + chunk, n_rep)
        gens = [np.random.default_rng(s) for s in children[c0:c1]]
        xi_all = np.stack([g.normal(0.0, scale, size=(n_steps, grid.n_sites)) for g in gens])
        vals = w0_values[c0:c1].copy()
        pos = 0
        if snap_idx and snap_idx[0] == 0:
            out[0, c0:c1] = vals
            pos = 1
        for k in range(1, n_steps + 1):
            vals = _advance(vals, spec, cfg, grid, xi_all[:, k - 1], heat_solve)
            if pos < len(snap_idx) and snap_idx[pos] == k:
                out[pos, c0:c1] = vals
                pos += 1
    return np.asarray(snap_idx, dtype=float) * cfg.dt, out


# ---------------------------------------------------------------------------
# norms and coupling
# ---------------------------------------------------------------------------

def weighted_norm(field: LatticeField, weight: WeightSpec, which: str = "E") -> float:
    """E: sqrt(sum w^2 rho_{-2r} h); H: flat sqrt(sum w^2 h)."""
    h = field.grid.spacing
    v2 = field.values ** 2
    if which == "H":
        return float(np.sqrt(np.sum(v2) * h))
    if which == "E":
        return float(np.sqrt(np.sum(v2 * weight.weight(field.grid.points())) * h))
    raise ValueError("which must be 'E' or 'H'")


@dataclass
class CouplingReport:
    """Per-time contraction ratios of a common-noise pair of solutions."""

    times: np.ndarray
    ratio_E: np.ndarray
    ratio_H: np.ndarray
    tolerance: float
    passed: bool


def coupling_test(w1: LatticeField, w2: LatticeField, spec: PotentialSpec,
                  cfg: SpdeConfig, noise: NoisePath,
                  tolerance: float | None = None) -> CouplingReport:
    """Run both initial data under the same noise; compare norm decay against
    exp((-k1 + 2 r^2) t / 2) in E and exp(-k1 t / 2) in H."""
    grid = w1.grid
    if w2.grid != grid:
        raise ValueError("fields live on different grids")
    if noise.grid != grid:
        raise ValueError("noise path does not match the fields")
    if tolerance is None:
        tolerance = 5.0 * (cfg.dt + grid.spacing ** 2)
    r = cfg.weight.r
    k1 = spec.k1

    t1 = evolve(w1, spec, cfg, noise)
    t2 = evolve(w2, spec, cfg, noise)
    d0 = LatticeField(grid, w1.values - w2.values)
    e0 = weighted_norm(d0, cfg.weight, "E")
    h0 = weighted_norm(d0, cfg.weight, "H")
    times = t1.times
    ratio_e = np.empty_like(times)
    ratio_h = np.empty_like(times)
    for i, t in enumerate(times):
        d = LatticeField(grid, t1.fields[i] - t2.fields[i])
        be = e0 * np.exp((-k1 + 2 * r * r) * t / 2.0)
        bh = h0 * np.exp(-k1 * t / 2.0)
        ratio_e[i] = weighted_norm(d, cfg.weight, "E") / be if be > 0 else 0.0
        ratio_h[i] = weighted_norm(d, cfg.weight, "H") / bh if bh > 0 else 0.0
    ok = bool(np.all(ratio_e <= 1 + tolerance) and np.all(ratio_h <= 1 + tolerance))
    return CouplingReport(times=times, ratio_E=ratio_e, ratio_H=ratio_h,
                          tolerance=tolerance, passed=ok)


# ---------------------------------------------------------------------------
# exact finite-volume sampler and invariance
# ---------------------------------------------------------------------------

def lattice_gibbs_sampler(spec: PotentialSpec, grid: LatticeGrid, seed: int,
                          n_samples: int, z_half_width: float = 8.0,
                          n_z: int = 1601) -> np.ndarray:
    """Exact samples (up to site-space discretization) from the invariant
    field measure, by forward-filter backward-sampling of the transfer
    operator; returns shape (n_samples, n_sites).

    Dirichlet boundaries add bond factors to pinned zero values at the walls;
    site values are drawn uniformly inside their winning cell.
    """
    if spec.dim != 1:
        raise potentials.DimensionMismatchError("sampler is one-dimensional")
    h = grid.spacing
    n = grid.n_sites
    z = np.linspace(-z_half_width, z_half_width, n_z)
    dz = z[1] - z[0]
    u = np.asarray(potentials.eval_U(spec, z))
    log_site = -h * u
    log_site -= log_site.max()
    site = np.exp(log_site)

    bond = np.exp(-(z[:, None] - z[None, :]) ** 2 / (2.0 * h))
    wall = np.exp(-z ** 2 / (2.0 * h)) if grid.boundary == "dirichlet" else np.ones_like(z)

    # forward messages f_i(a): chain weight of x_0..x_i with x_i = a
    msgs = np.empty((n, n_z))
    f = site * wall
    f /= f.max()
    msgs[0] = f
    for i in range(1, n):
        f = site * (bond @ f) * dz
        f /= f.max()
        msgs[i] = f

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    samples_idx = np.empty((n_samples, n), dtype=np.int64)

    last = msgs[-1] * wall
    cdf = np.cumsum(last)
    cdf /= cdf[-1]
    samples_idx[:, -1] = np.searchsorted(cdf, rng.random(n_samples), side="left")

    for i in range(n - 2, -1, -1):
        nxt = samples_idx[:, i + 1]
        uniq, inv = np.unique(nxt, return_inverse=True)
        cdfs = np.cumsum(msgs[i][None, :] * bond[:, uniq].T, axis=1)
        cdfs /= cdfs[:, -1:]
        us = rng.random(n_samples)
        samples_idx[:, i] = np.array([
            np.searchsorted(cdfs[inv[s]], us[s], side="left") for s in range(n_samples)
        ]) if n_samples < 64 else _grouped_searchsorted(cdfs, inv, us)

    jitter = rng.random((n_samples, n)) - 0.5
    return z[np.minimum(samples_idx, n_z - 1)] + jitter * dz


def _grouped_searchsorted(cdfs, inv, us):
    out = np.empty(inv.shape, dtype=np.int64)
    order = np.argsort(inv, kind="stable")
    sorted_inv = inv[order]
    bounds = np.searchsorted(sorted_inv, np.arange(cdfs.shape[0] + 1))
    for g in range(cdfs.shape[0]):
        sel = order[bounds[g]:bounds[g + 1]]
        if sel.size:
            out[sel] = np.searchsorted(cdfs[g], us[sel], side="left")
    return np.minimum(out, cdfs.shape[1] - 1)


@dataclass
class InvarianceReport:
    ks_distance: float
    tolerance: float
    n_replicas: int
    passed: bool


def invariance_test(spec: PotentialSpec, cfg: SpdeConfig, grid: LatticeGrid,
                    seed: int, n_replicas: int, tolerance: float = 0.02,
                    z_half_width: float = 8.0) -> InvarianceReport:
    """Start replicas from the exact finite-volume measure, evolve to t_final,
    and compare pooled site marginals at times 0 and t_final by two-sample KS.
    """
    if cfg.drift_mode != "split_prox":
        raise ValueError("invariance test requires the split_prox scheme")
    k1 = max(spec.k1, 1e-6)
    corr_sites = min(grid.n_sites, max(1.0, 1.0 / (np.sqrt(k1) * grid.spacing)))
    n_eff = n_replicas * grid.n_sites / (2.0 * corr_sites)
    floor = 1.63 * np.sqrt(2.0 / n_eff)
    if floor > tolerance:
        raise InsufficientReplicasError(
            f"KS resolution {floor:.3f} exceeds tolerance {tolerance}; add replicas")

    start = lattice_gibbs_sampler(spec, grid, seed, n_replicas, z_half_width=z_half_width)
    _, snaps = evolve_ensemble(start, spec, cfg, grid, seed + 1,
                               snapshot_times=[cfg.t_final])
    ks = float(ks_2samp(start.ravel(), snaps[-1].ravel()).statistic)
    return InvarianceReport(ks_distance=ks, tolerance=tolerance,
                            n_replicas=n_replicas, passed=ks < tolerance)


# ---------------------------------------------------------------------------
# heat-kernel weight bound and interpolation inequality
# ---------------------------------------------------------------------------

@dataclass
class HeatWeightReport:
    t_values: np.ndarray
    max_ratio: np.ndarray           # per t: max over x of G_t w / (e^{2r^2 t} w)
    bound_holds: bool
    interpolation_holds: bool
    interpolation_worst_slack: float
    passed: bool


def heat_weight_bound_check(weight: WeightSpec, t_list, x_grid,
                            deltas=(0.1, 1.0, 10.0),
                            test_functions=None) -> HeatWeightReport:
    """Quadrature check of G_t rho_{-2r} <= e^{2 r^2 t} rho_{-2r} pointwise,
    plus the derivative interpolation bound
    ||f'||_E <= (2r + 1/delta) ||f||_E + delta ||f''||_E on a test family.
    """
    x = np.asarray(x_grid, dtype=float)
    t_arr = np.asarray(sorted(t_list), dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("t values must be positive")
    span = 10.0 * np.sqrt(t_arr.max())
    if x.max() < 1.0 + np.sqrt(t_arr.max()) or x.min() > -(1.0 + np.sqrt(t_arr.max())):
        raise ValueError(
            "x grid too narrow: it must cover the |x| region out to 1 + sqrt(t_max)")
    y = np.linspace(x.min() - span, x.max() + span, 40001)
    if y[1] - y[0] > np.sqrt(t_arr.min()) / 8:
        y = np.linspace(x.min() - span, x.max() + span, 200001)
    hy = y[1] - y[0]
    wy = rho(y, -2.0 * weight.r)
    wx = rho(x, -2.0 * weight.r)

    ratios = np.empty_like(t_arr)
    for i, t in enumerate(t_arr):
        g = np.exp(-(x[:, None] - y[None, :]) ** 2 / (2.0 * t)) / np.sqrt(2 * np.pi * t)
        mass = g.sum(axis=1) * hy
        if np.min(mass) < 1.0 - 1e-12:
            raise ValueError("x grid too narrow for the requested times")
        conv = g @ wy * hy
        ratios[i] = float(np.max(conv / (np.exp(2 * weight.r ** 2 * t) * wx)))
    bound_holds = bool(np.all(ratios <= 1.0 + 1e-9))

    if test_functions is None:
        test_functions = _default_interpolation_family()
    qx = np.linspace(-30.0, 30.0, 60001)
    qw = rho(qx, -2.0 * weight.r) * (qx[1] - qx[0])
    worst = np.inf
    for f, df, d2f in test_functions:
        nf = np.sqrt(np.sum(f(qx) ** 2 * qw))
        n1 = np.sqrt(np.sum(df(qx) ** 2 * qw))
        n2 = np.sqrt(np.sum(d2f(qx) ** 2 * qw))
        for d in deltas:
            worst = min(worst, (2 * weight.r + 1.0 / d) * nf + d * n2 - n1)
    interp_ok = bool(worst >= 0)
    return HeatWeightReport(t_values=t_arr, max_ratio=ratios, bound_holds=bound_holds,
                            interpolation_holds=interp_ok,
                            interpolation_worst_slack=float(worst),
                            passed=bound_holds and interp_ok)


def _default_interpolation_family():
    gauss = (lambda x: np.exp(-x ** 2),
             lambda x: -2 * x * np.exp(-x ** 2),
             lambda x: (4 * x ** 2 - 2) * np.exp(-x ** 2))
    singauss = (lambda x: np.sin(3 * x) * np.exp(-x ** 2 / 4),
                lambda x: (3 * np.cos(3 * x) - 0.5 * x * np.sin(3 * x)) * np.exp(-x ** 2 / 4),
                lambda x: ((x ** 2 / 4 - 9.5) * np.sin(3 * x)
                           - 3 * x * np.cos(3 * x)) * np.exp(-x ** 2 / 4))
    shifted = (lambda x: np.exp(-(x - 1) ** 2 / 2),
               lambda x: -(x - 1) * np.exp(-(x - 1) ** 2 / 2),
               lambda x: ((x - 1) ** 2 - 1) * np.exp(-(x - 1) ** 2 / 2))
    return [gauss, singauss, shifted]
