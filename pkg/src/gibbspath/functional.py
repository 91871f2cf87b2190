"""Entropy and gradient inequalities for the stationary dynamics.

The stationary one-point marginal omega^2 dz carries the entropy bound
Ent(f^2) <= (2/k1) * int |f'|^2 omega^2 dz whenever k1 > 0; the lattice
semigroup satisfies the finite-time version with constant
2(1 - exp(-k1 t))/k1 and the gradient bound |d_e P_t F| <=
exp(-k1 t/2) P_t(|DF|_H) for unit directions e.

For a one-site cylinder F(w) = f(w(x_0)) the lattice pairing gives
|DF(w)|_H = |f'(w(x_0))| / sqrt(h) and the unit one-site direction is
e = 1_site / sqrt(h); with this normalization the free-field case saturates
both bounds exactly (closed-form lattice Ornstein-Uhlenbeck computation), which
is what fixes the convention.

All checks are one-sided: reports carry the slack when the inequality holds
and the violation when it does not, never a sharpness claim.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass
from typing import Callable

from . import spde
from .potentials import PotentialSpec
from .schrodinger import GroundState, SpectralData
from .spde import LatticeGrid, SpdeConfig


@dataclass(frozen=True)
class TestFunction:
    """Bounded observable with analytic derivative (and second derivative when smooth)."""

    name: str
    f: Callable
    df: Callable
    d2f: Callable | None = None


def default_family() -> tuple[TestFunction, ...]:
    """Nine bounded-on-range observables: exponentials, bumps, saturated shapes."""
    return (
        TestFunction("exp_half", lambda z: np.exp(0.5 * z), lambda z: 0.5 * np.exp(0.5 * z),
                     lambda z: 0.25 * np.exp(0.5 * z)),
        TestFunction("exp_neg_half", lambda z: np.exp(-0.5 * z), lambda z: -0.5 * np.exp(-0.5 * z),
                     lambda z: 0.25 * np.exp(-0.5 * z)),
        TestFunction("exp_one", lambda z: np.exp(z), lambda z: np.exp(z), lambda z: np.exp(z)),
        TestFunction("gauss_bump", lambda z: np.exp(-z ** 2), lambda z: -2 * z * np.exp(-z ** 2),
                     lambda z: (4 * z ** 2 - 2) * np.exp(-z ** 2)),
        TestFunction("shifted_bump", lambda z: np.exp(-(z - 1) ** 2),
                     lambda z: -2 * (z - 1) * np.exp(-(z - 1) ** 2),
                     lambda z: (4 * (z - 1) ** 2 - 2) * np.exp(-(z - 1) ** 2)),
        TestFunction("tanh", lambda z: np.tanh(z), lambda z: 1.0 / np.cosh(z) ** 2,
                     lambda z: -2 * np.tanh(z) / np.cosh(z) ** 2),
        TestFunction("sine", lambda z: np.sin(z), lambda z: np.cos(z), lambda z: -np.sin(z)),
        TestFunction("hinge", lambda z: np.clip(np.abs(z) - 1.0, 0.0, 2.0),
                     lambda z: np.sign(z) * ((np.abs(z) > 1.0) & (np.abs(z) < 3.0))),
        TestFunction("rational_sat", lambda z: z / (1.0 + z ** 2),
                     lambda z: (1.0 - z ** 2) / (1.0 + z ** 2) ** 2,
                     lambda z: 2 * z * (z ** 2 - 3) / (1.0 + z ** 2) ** 3),
        TestFunction("cubic_sat", lambda z: np.tanh(z) ** 3,
                     lambda z: 3 * np.tanh(z) ** 2 / np.cosh(z) ** 2),
    )


@dataclass
class LsiRow:
    name: str
    entropy: float
    energy_bound: float
    slack: float
    passed: bool


@dataclass
class LsiReport:
    constant: float
    rows: list[LsiRow]
    passed: bool

    @property
    def worst_slack(self) -> float:
        return min(r.slack for r in self.rows)


def lsi_marginal_check(gs: GroundState, k1: float,
                       family: tuple[TestFunction, ...] | None = None,
                       tol: float = 1e-8) -> LsiReport:
    """Quadrature check of Ent(f^2) <= (2/k1) int f'^2 dmu on mu = omega^2 dz."""
    if k1 <= 0:
        raise ValueError("the entropy bound needs k1 > 0")
    if family is None:
        family = default_family()
    z = gs.grid.points()
    h = gs.grid.spacing
    mu = gs.omega ** 2 * h
    mu = mu / mu.sum()
    rows = []
    for tf in family:
        f2 = np.asarray(tf.f(z), dtype=float) ** 2
        norm2 = float(np.sum(f2 * mu))
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(f2 > 0, f2 * np.log(f2 / norm2), 0.0)
        ent = float(np.sum(integrand * mu))
        energy = (2.0 / k1) * float(np.sum(np.asarray(tf.df(z)) ** 2 * mu))
        slack = energy - ent
        rows.append(LsiRow(name=tf.name, entropy=ent, energy_bound=energy,
                           slack=slack, passed=slack >= -tol))
    return LsiReport(constant=2.0 / k1, rows=rows, passed=all(r.passed for r in rows))


def entropy_nonnegative_defect(gs: GroundState,
                               family: tuple[TestFunction, ...] | None = None) -> float:
    """min over the family of Ent(f^2); must be >= -1e-12 (Jensen)."""
    if family is None:
        family = default_family()
    z = gs.grid.points()
    mu = gs.omega ** 2 * gs.grid.spacing
    mu = mu / mu.sum()
    worst = np.inf
    for tf in family:
        f2 = np.asarray(tf.f(z), dtype=float) ** 2
        norm2 = float(np.sum(f2 * mu))
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(f2 > 0, f2 * np.log(f2 / norm2), 0.0)
        worst = min(worst, float(np.sum(integrand * mu)))
    return worst


# ---------------------------------------------------------------------------
# Monte Carlo semigroup checks
# ---------------------------------------------------------------------------

def _batched(stat, values, n_batches=25):
    """Mean and batch-means standard error of a statistic of sample arrays."""
    n = values[0].shape[0]
    if n < 2 * n_batches:
        raise ValueError("too few replicas for batching")
    edges = np.linspace(0, n, n_batches + 1, dtype=int)
    vals = np.array([stat(*(v[a:b] for v in values)) for a, b in zip(edges, edges[1:])])
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(n_batches))


@dataclass
class SemigroupRow:
    t: float
    lhs: float
    rhs: float
    stderr: float
    passed: bool


@dataclass
class SemigroupReport:
    rows: list[SemigroupRow]
    passed: bool


def heat_lsi_check(spec: PotentialSpec, cfg: SpdeConfig, grid: LatticeGrid,
                   f: TestFunction, t_list, n_replicas: int, seed: int,
                   start: np.ndarray | None = None,
                   site_index: int | None = None) -> SemigroupReport:
    """Monte Carlo check of the finite-time entropy bound along the dynamics.

    At each t: P_t(F^2 log F^2) - P_t(F^2) log P_t(F^2) against
    (2(1-e^{-k1 t})/k1) P_t(|DF|_H^2) for the one-site cylinder F = f(w(x_0));
    passes when the bound holds within 3 batch standard errors.
    """
    if spec.k1 <= 0:
        raise ValueError("the finite-time entropy bound needs k1 > 0")
    h = grid.spacing
    i0 = grid.n_sites // 2 if site_index is None else site_index
    w0 = np.zeros(grid.n_sites) if start is None else np.asarray(start, dtype=float)
    t_list = sorted(t_list)
    cfg = _with_t_final(cfg, max(t_list))
    _, snaps = spde.evolve_ensemble(np.tile(w0, (n_replicas, 1)), spec, cfg, grid,
                                    seed, snapshot_times=t_list)
    rows = []
    for t, snap in zip(t_list, snaps):
        x = snap[:, i0]
        f2 = np.asarray(f.f(x), dtype=float) ** 2
        grad2 = np.asarray(f.df(x), dtype=float) ** 2 / h
        c_t = 2.0 * (1.0 - np.exp(-spec.k1 * t)) / spec.k1

        def ent_stat(f2_b, g2_b):
            m = np.mean(f2_b)
            return np.mean(f2_b * np.log(np.maximum(f2_b, 1e-300))) - m * np.log(m)

        def bound_stat(f2_b, g2_b):
            return c_t * np.mean(g2_b)

        lhs, _ = _batched(ent_stat, (f2, grad2))
        rhs, _ = _batched(bound_stat, (f2, grad2))
        slack, se = _batched(lambda a, b: bound_stat(a, b) - ent_stat(a, b), (f2, grad2))
        rows.append(SemigroupRow(t=t, lhs=lhs, rhs=rhs, stderr=se, passed=slack >= -3 * se))
    return SemigroupReport(rows=rows, passed=all(r.passed for r in rows))


def gradient_estimate_check(spec: PotentialSpec, cfg: SpdeConfig, grid: LatticeGrid,
                            f: TestFunction, t_list, n_replicas: int, seed: int,
                            start: np.ndarray | None = None,
                            site_index: int | None = None,
                            eps: float = 1e-4) -> SemigroupReport:
    """Common-noise finite-difference check of
    |d_e P_t F| <= e^{-k1 t/2} P_t(|DF|_H) for a unit one-site direction e.

    Both ensembles share per-replica noise streams, so the difference estimator
    has no common-noise variance inflation.
    """
    h = grid.spacing
    i0 = grid.n_sites // 2 if site_index is None else site_index
    w0 = np.zeros(grid.n_sites) if start is None else np.asarray(start, dtype=float)
    w0p = w0.copy()
    w0p[i0] += eps / np.sqrt(h)     # eps * unit H-vector
    t_list = sorted(t_list)
    cfg = _with_t_final(cfg, max(t_list))
    _, base = spde.evolve_ensemble(np.tile(w0, (n_replicas, 1)), spec, cfg, grid,
                                   seed, snapshot_times=t_list)
    _, pert = spde.evolve_ensemble(np.tile(w0p, (n_replicas, 1)), spec, cfg, grid,
                                   seed, snapshot_times=t_list)
    rows = []
    for t, xb, xp in zip(t_list, base, pert):
        diff = (np.asarray(f.f(xp[:, i0])) - np.asarray(f.f(xb[:, i0]))) / eps
        bound = np.exp(-spec.k1 * t / 2.0) * np.abs(np.asarray(f.df(xb[:, i0]))) / np.sqrt(h)
        top = float(np.abs(diff).max())
        if 0.0 < top < 1e3 * np.finfo(float).eps / eps:
            raise RuntimeError("directional difference below cancellation floor; increase eps")

        def slack_stat(d_b, b_b):
            return np.mean(b_b) - abs(np.mean(d_b))

        slack, se = _batched(slack_stat, (diff, bound))
        lhs, _ = _batched(lambda d_b, b_b: abs(np.mean(d_b)), (diff, bound))
        rhs, _ = _batched(lambda d_b, b_b: np.mean(b_b), (diff, bound))
        rows.append(SemigroupRow(t=t, lhs=lhs, rhs=rhs, stderr=se, passed=slack >= -3 * se))
    return SemigroupReport(rows=rows, passed=all(r.passed for r in rows))


def _with_t_final(cfg: SpdeConfig, t_final: float) -> SpdeConfig:
    from dataclasses import replace
    n = int(round(t_final / cfg.dt))
    return replace(cfg, t_final=n * cfg.dt)


# ---------------------------------------------------------------------------
# spectral-gap shadows
# ---------------------------------------------------------------------------

@dataclass
class GapReport:
    gap: float
    bound: float
    slack: float
    passed: bool


def spectral_gap_check(spectral: SpectralData, k1: float, tol: float = 1e-9) -> GapReport:
    """Finite-dimensional shadow: the one-point generator gap lam1 - lam0
    against k1/2.  The infinite-volume claim is not directly computable; this
    checks its transfer-operator projection.
    """
    if spectral.eigenvalues.size < 2:
        raise ValueError("need at least two eigenvalues")
    gap = float(spectral.eigenvalues[1] - spectral.eigenvalues[0])
    bound = k1 / 2.0
    return GapReport(gap=gap, bound=bound, slack=gap - bound, passed=gap >= bound - tol)


@dataclass
class MixingReport:
    rate: float
    bound: float
    stderr: float
    passed: bool


def autocorr_rate_check(spec: PotentialSpec, cfg: SpdeConfig, grid: LatticeGrid,
                        seed: int, n_replicas: int = 2000,
                        lag_times=(0.5, 1.0, 1.5, 2.0)) -> MixingReport:
    """Dynamic shadow of the gap: the slowest decay rate of stationary site
    autocorrelations must be at least k1/2.

    Replicas start from the exact finite-volume measure; the rate comes from a
    log-linear fit of center-site autocorrelations over the requested lags.
    """
    start = spde.lattice_gibbs_sampler(spec, grid, seed, n_replicas)
    lag_times = sorted(lag_times)
    cfg = _with_t_final(cfg, max(lag_times))
    _, snaps = spde.evolve_ensemble(start, spec, cfg, grid, seed + 1,
                                    snapshot_times=lag_times)
    i0 = grid.n_sites // 2
    x0 = start[:, i0] - start[:, i0].mean()
    corrs, ses = [], []
    for snap in snaps:
        xt = snap[:, i0] - snap[:, i0].mean()
        prod = x0 * xt
        corrs.append(prod.mean())
        ses.append(prod.std(ddof=1) / np.sqrt(n_replicas))
    corrs = np.asarray(corrs)
    if np.any(corrs <= 0):
        raise ValueError("autocorrelation crossed zero; shorten the lags")
    ts = np.asarray(lag_times)
    slope, _ = np.polyfit(ts, np.log(corrs), 1)
    rate = -float(slope)
    rate_se = float(np.mean(ses) / np.mean(corrs) / (ts[-1] - ts[0]))
    bound = spec.k1 / 2.0
    return MixingReport(rate=rate, bound=bound, stderr=rate_se,
                        passed=rate >= bound - 3 * rate_se)
