"""Finite-difference eigensolver for H = -(1/2) d^2/dz^2 + U on a truncated line.

The operator is discretized with the 3-point stencil on a uniform grid of n
interior points over [-L, L] with Dirichlet walls (justified whenever the
ground state decays fast at the walls; a boundary-mass check enforces it).
Selected eigenpairs come from LAPACK's bisection + inverse iteration; ground
states are sign-fixed positive and normalized in the h-weighted L2 sum.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass
from scipy.linalg import eigh_tridiagonal

from . import convex, potentials
from .potentials import PotentialSpec


class EigensolverError(RuntimeError):
    """Eigensolve rejected: grid too coarse, walls too close, or no convergence."""


@dataclass(frozen=True)
class ZGrid:
    """Uniform interior grid on [-half_width, half_width], Dirichlet walls."""

    half_width: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 interior points")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n + 1)

    def points(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(1, self.n + 1)


@dataclass
class GroundState:
    """Minimal eigenpair: strictly positive omega, normalized sum(omega^2)h = 1."""

    lambda0: float
    omega: np.ndarray
    grid: ZGrid
    residual: float

    def density(self) -> np.ndarray:
        """Stationary one-point density omega^2 on the grid."""
        return self.omega ** 2


@dataclass
class SpectralData:
    """First k eigenpairs, orthonormal in the h-weighted inner product."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # shape (n, k), columns phi_j with sum(phi_i phi_j) h = delta_ij
    grid: ZGrid


def assemble(spec: PotentialSpec, grid: ZGrid) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal (diagonal, off-diagonal) of the discrete operator.

    diagonal = 1/h^2 + U(z_i), off-diagonal = -1/(2 h^2); d = 1 only.
    """
    if spec.dim != 1:
        raise potentials.DimensionMismatchError("eigensolver is one-dimensional")
    z = grid.points()
    return assemble_from_values(np.asarray(potentials.eval_U(spec, z)), grid)


def assemble_from_values(u_values: np.ndarray, grid: ZGrid) -> tuple[np.ndarray, np.ndarray]:
    h = grid.spacing
    diag = 1.0 / h ** 2 + np.asarray(u_values, dtype=float)
    if diag.shape != (grid.n,):
        raise ValueError("potential values must match the grid")
    off = np.full(grid.n - 1, -0.5 / h ** 2)
    return diag, off


def _residual_tol(diag) -> float:
    # attainable floor of a backward-stable solve: eps * ||H|| scale
    scale = float(np.max(np.abs(diag))) * 2.0
    return max(1e-10, 64 * np.finfo(float).eps * scale)


def _solve_pairs(diag, off, k):
    lam, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
    return lam, vec


def ground_state_from_values(u_values, grid: ZGrid, boundary_tol: float = 1e-6) -> GroundState:
    """Ground state for tabulated potential values on the grid."""
    diag, off = assemble_from_values(u_values, grid)
    lam, vec = _solve_pairs(diag, off, 1)
    v = vec[:, 0]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    h = grid.spacing
    # LAPACK returns a unit 2-norm vector; rescale to sum(omega^2) h = 1
    omega = v / np.sqrt(h)

    resid = _eig_residual(diag, off, lam[0], v)
    tol = _residual_tol(diag)
    if resid > tol:
        raise EigensolverError(f"eigenpair residual {resid:.2e} above {tol:.2e}")
    edge = max(abs(omega[0]), abs(omega[-1])) * np.sqrt(h)
    if edge > boundary_tol:
        raise EigensolverError(
            f"boundary mass {edge:.2e} above {boundary_tol:.0e}: enlarge half_width")
    if np.any(omega <= 0):
        floor = np.max(omega) * np.finfo(float).eps
        if np.any(omega < -floor * 16):
            raise EigensolverError("ground state is not positive; grid too coarse")
        omega = np.maximum(omega, floor)
    lam0 = float(lam[0])
    umin = float(np.min(u_values))
    if not lam0 > umin:
        raise EigensolverError(f"lambda0 = {lam0} is not above min U = {umin}")
    return GroundState(lambda0=lam0, omega=omega, grid=grid, residual=resid)


def _eig_residual(diag, off, lam, v):
    hv = diag * v
    hv[:-1] += off * v[1:]
    hv[1:] += off * v[:-1]
    return float(np.linalg.norm(hv - lam * v))


def ground_state(spec: PotentialSpec, grid: ZGrid) -> GroundState:
    """Minimal eigenpair of the assembled operator for ``spec``."""
    z = grid.points()
    return ground_state_from_values(np.asarray(potentials.eval_U(spec, z)), grid)


def spectrum(spec: PotentialSpec, grid: ZGrid, k: int) -> SpectralData:
    """First k eigenpairs, h-orthonormal, nondecreasing eigenvalues."""
    if not 1 <= k <= grid.n:
        raise ValueError(f"k must be in [1, {grid.n}]")
    diag, off = assemble(spec, grid)
    lam, vec = _solve_pairs(diag, off, k)
    h = grid.spacing
    vec = vec / np.sqrt(h)
    i0 = int(np.argmax(np.abs(vec[:, 0])))
    if vec[i0, 0] < 0:
        vec[:, 0] = -vec[:, 0]
    return SpectralData(eigenvalues=lam, eigenvectors=vec, grid=grid)


def local_inf_U(spec: PotentialSpec, z: float, radius: float) -> float:
    """inf of U over the closed ball of ``radius`` around z (d = 1).

    Grid scan plus golden-section refinement around the best cell; exact for
    the convex case and robust for double wells.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if spec.dim != 1:
        raise potentials.DimensionMismatchError("local_inf_U is one-dimensional")
    if radius == 0:
        return float(potentials.eval_U(spec, z))
    ys = np.linspace(z - radius, z + radius, 1025)
    us = np.asarray(potentials.eval_U(spec, ys))
    i = int(np.argmin(us))
    lo = ys[max(i - 1, 0)]
    hi = ys[min(i + 1, len(ys) - 1)]
    return float(min(us[i], _golden_min(lambda y: potentials.eval_U(spec, y), lo, hi)))


def _golden_min(f, lo, hi, tol=1e-12, max_iter=200):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(fc, fd)


def local_sup_U(spec: PotentialSpec, radius: float) -> float:
    """sup of U over the centered ball |y| <= radius (d = 1), by scan."""
    ys = np.linspace(-radius, radius, 2049)
    return float(np.max(potentials.eval_U(spec, ys)))


@dataclass
class DecayReport:
    """Fitted decay-envelope constants and their pointwise verification.

    Upper bound: omega(z) <= d1 * exp(-d2 * |z| * inf_ball^(1/2)) on the fit
    region, inf over the ball of radius |z|/2 around z.  Lower bound:
    omega(z) >= d3 * exp(-d4 * |z| * sup_ball^(1/2)), sup over |y| <= 3|z|.
    Feasibility means positive constants verify pointwise on the region.
    """

    fit_z: np.ndarray
    d1: float
    d2: float
    upper_feasible: bool
    d3: float
    d4: float
    lower_feasible: bool
    passed: bool


def decay_check(gs: GroundState, spec: PotentialSpec, min_abs_z: float = 2.0) -> DecayReport:
    """Fit and verify the two-sided decay envelopes of the ground state.

    Raises InsufficientRangeError when the grid has no usable points with
    |z| >= min_abs_z; points where omega sits at the eigensolver noise floor
    are excluded (wall-truncation artifacts).
    """
    z = gs.grid.points()
    om = gs.omega
    floor = np.max(om) * 1e-13
    usable = (np.abs(z) >= min_abs_z) & (om > floor)
    if np.count_nonzero(usable) < 8:
        raise potentials.InsufficientRangeError(
            f"need grid points with |z| >= {min_abs_z} and omega above noise floor")
    zf = z[usable]
    omf = om[usable]
    log_om = np.log(omf)

    g_up = np.array([abs(v) * np.sqrt(max(local_inf_U(spec, v, abs(v) / 2), 0.0)) for v in zf])
    d1 = 2.0 * float(np.max(om))
    with np.errstate(divide="ignore"):
        ratios_up = (np.log(d1) - log_om) / np.where(g_up > 0, g_up, np.inf)
    d2 = float(np.min(ratios_up))
    upper_ok = d2 > 0 and bool(np.all(log_om <= np.log(d1) - d2 * g_up + 1e-9))

    g_lo = np.array([abs(v) * np.sqrt(max(local_sup_U(spec, 3 * abs(v)), 0.0)) for v in zf])
    d3 = 0.5 * float(np.min(omf[np.abs(zf) <= np.min(np.abs(zf)) + gs.grid.spacing]))
    ratios_lo = (np.log(d3) - log_om) / np.where(g_lo > 0, g_lo, np.inf)
    d4 = float(max(np.max(ratios_lo), 1e-12))
    lower_ok = bool(np.all(log_om >= np.log(d3) - d4 * g_lo - 1e-9))

    return DecayReport(fit_z=zf, d1=d1, d2=d2, upper_feasible=upper_ok,
                       d3=d3, d4=d4, lower_feasible=lower_ok,
                       passed=upper_ok and lower_ok)


def moreau_ground_sequence(spec: PotentialSpec, grid: ZGrid, n_list) -> list[GroundState]:
    """Ground states of the regularized potentials U_N = (k1/2)z^2 + V_{1/N}.

    Requires k1 > 0.  The minimal eigenvalues are nondecreasing in N and
    converge from below to the unregularized lambda0; the ground states
    converge in the h-weighted L2 norm.
    """
    if spec.k1 <= 0:
        raise ValueError("the regularized sequence needs k1 > 0")
    z = grid.points()
    out = []
    for n in n_list:
        if n <= 0:
            raise ValueError("N values must be positive")
        env = np.asarray(convex.moreau_env(convex.ProxProblem(spec, 1.0 / n), z))
        u_n = 0.5 * spec.k1 * z ** 2 + env
        out.append(ground_state_from_values(u_n, grid))
    return out


def l2_distance(a: GroundState, b: GroundState) -> float:
    """h-weighted L2 distance between two ground states on the same grid."""
    if a.grid != b.grid:
        raise ValueError("ground states live on different grids")
    return float(np.sqrt(np.sum((a.omega - b.omega) ** 2) * a.grid.spacing))
