"""Proximal toolkit for the convex part V of a potential.

Implements the resolvent J_a(z) = argmin_y |y-z|^2/(2a) + V(y), the envelope
V_a(z) = |J_a(z)-z|^2/(2a) + V(J_a(z)), the Lipschitz surrogate gradient
(z - J_a(z))/a (which equals d0V at J_a(z) for convex V), and the drift maps
b~(z) = -d0V(z)/2 in exact or regularized form.

Closed forms are used for the |z| kink (soft threshold) and quadratic V
(linear resolvent); everything else goes through a safeguarded Newton solve of
the monotone scalar optimality condition y + a*d0V(y) = z with a bisection
fallback, so discontinuous subgradients are handled.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from . import potentials
from .potentials import PotentialSpec


class ProxConvergenceError(RuntimeError):
    """Scalar prox solve failed to reach the requested residual."""


@dataclass(frozen=True)
class ProxProblem:
    """V-prox instance: the convex part of ``spec`` with parameter ``alpha``."""

    spec: PotentialSpec
    alpha: float
    solver_tol: float = 1e-12
    max_iter: int = 120

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")


# ---------------------------------------------------------------------------
# structure probes
# ---------------------------------------------------------------------------

def _quadratic_v_coeff(spec) -> float | None:
    """If V is purely quadratic c|z|^2/2, return c, else None."""
    if spec.kind == "polynomial":
        extra = [c for j, c in enumerate(spec.coeffs) if j not in (0, 2) and c != 0.0]
        if not extra:
            a2 = spec.coeffs[2] if len(spec.coeffs) > 2 else 0.0
            return 2.0 * a2 - spec.k1
        return None
    if spec.kind == "exponential" and not spec.atoms:
        return spec.mass ** 2 - spec.k1
    if spec.kind == "absnorm" and spec.slope == 0.0:
        return 0.0
    return None


def _is_plain_absnorm(spec) -> bool:
    if spec.kind != "absnorm":
        return False
    return True


def _shrink(z, s, dim):
    if dim == 1:
        return np.sign(z) * np.maximum(np.abs(z) - s, 0.0)
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    return z * np.maximum(norm - s, 0.0) / safe


# ---------------------------------------------------------------------------
# scalar solver (d = 1 profiles)
# ---------------------------------------------------------------------------

def _v_grad(spec, y):
    return np.asarray(potentials.min_section_subgrad_v(spec, y))


def _v_hess(spec, y):
    """Second derivative of the smooth part of V (d=1); used only to speed Newton."""
    y = np.asarray(y, dtype=float)
    if spec.kind == "polynomial":
        h = np.zeros_like(y)
        r = np.abs(y)
        for j in range(len(spec.coeffs) - 1, 1, -1):
            h = h * r + j * (j - 1) * spec.coeffs[j]
        return h - spec.k1
    if spec.kind == "absnorm":
        return np.zeros_like(y)
    if spec.kind == "exponential":
        h = spec.mass ** 2 - spec.k1 + np.zeros_like(y)
        for xi, w in spec.atoms:
            h = h + w * xi * xi * np.exp(xi * y)
        return h
    if spec.kind == "trigonometric":
        h = spec.mass ** 2 - spec.k1 + np.zeros_like(y)
        for xi, w in spec.atoms:
            h = h - w * xi * xi * np.cos(xi * y + spec.phase)
        return h
    h = np.zeros_like(y)
    for w, p in spec.parts:
        h = h + w * _v_hess(p, y)
    return h


def _kink_radius(spec) -> float:
    if spec.kind == "absnorm":
        return spec.slope
    if spec.kind == "polynomial":
        return spec.coeffs[1] if len(spec.coeffs) > 1 else 0.0
    if spec.kind == "superposition":
        return sum(w * _kink_radius(p) for w, p in spec.parts)
    return 0.0


def _prox_scalar(spec, alpha, z, tol, max_iter):
    """Vectorized solve of y + alpha*d0V(y) = z for the d=1 profile of V.

    The residual is monotone increasing in y, so a sign-changing bracket always
    exists; Newton steps are taken when they stay inside the bracket, bisection
    otherwise.  Convergence is declared through the subdifferential residual
    dist((z-y)/alpha, dV(y)), which also covers minimizers at the kink.
    """
    z = np.asarray(z, dtype=float)

    def res(y):
        # bracket expansion may probe far out where exp-type parts overflow to inf;
        # the sign logic stays valid
        with np.errstate(over="ignore"):
            return y + alpha * _v_grad(spec, y) - z

    width = 1.0 + alpha * np.abs(_v_grad(spec, z))
    lo, hi = z - width, z + width
    for _ in range(200):
        bad = res(lo) > 0
        if not np.any(bad):
            break
        lo = np.where(bad, lo - 2 * (z - lo + 1.0), lo)
    for _ in range(200):
        bad = res(hi) < 0
        if not np.any(bad):
            break
        hi = np.where(bad, hi + 2 * (hi - z + 1.0), hi)

    y = 0.5 * (lo + hi)
    res_scale = 1e-15 * (1.0 + np.abs(z))
    for _ in range(max_iter):
        r = res(y)
        done = np.abs(r) <= res_scale
        if np.all(done):
            break
        lo = np.where(r < 0, y, lo)
        hi = np.where(r > 0, y, hi)
        dr = 1.0 + alpha * _v_hess(spec, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = y - r / np.where(dr > 0, dr, 1.0)
        inside = (newton > lo) & (newton < hi) & (dr > 0)
        y = np.where(done, y, np.where(inside, newton, 0.5 * (lo + hi)))
        if np.all(done | (hi - lo <= 1e-15 * (1.0 + np.abs(y)))):
            break

    # snap to an exact kink when the bracket has collapsed onto the origin
    kink = _kink_radius(spec)
    if kink > 0:
        near0 = np.abs(y) <= 1e-12 * (1.0 + np.abs(z))
        y = np.where(near0 & _kink_admissible(spec, alpha, z, kink), 0.0, y)

    resid = _subdiff_residual(spec, alpha, z, y, kink)
    if np.any(resid > tol * (1.0 + np.abs(z))):
        worst = float(np.max(resid))
        raise ProxConvergenceError(
            f"prox solve residual {worst:.3e} above tolerance {tol:.3e}")
    return y


def _kink_admissible(spec, alpha, z, kink):
    g0 = _v_grad(spec, np.zeros_like(np.asarray(z, dtype=float)))
    # smooth part of dV at 0: remove the kink's sign(0)=0 contribution (already absent)
    return np.abs(z / alpha - g0) <= kink + 1e-12


def _subdiff_residual(spec, alpha, z, y, kink):
    # measured in y-units: dist(z - y, alpha * dV(y)); dividing by alpha would
    # amplify input roundoff without bound for small alpha
    g = _v_grad(spec, y)
    resid = np.abs(y + alpha * g - z)
    if kink > 0:
        at0 = y == 0.0
        g0 = _v_grad(spec, np.zeros_like(np.asarray(y, dtype=float)))
        slack = np.maximum(np.abs(z - alpha * g0) - alpha * kink, 0.0)
        resid = np.where(at0, slack, resid)
    return resid


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def prox(p: ProxProblem, z):
    """Resolvent J_a(z): the unique minimizer of |y-z|^2/(2a) + V(y)."""
    spec, a = p.spec, p.alpha
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise ValueError("non-finite input point")
    scalar = z_arr.ndim == 0 if spec.dim == 1 else z_arr.ndim == 1

    c = _quadratic_v_coeff(spec)
    if c is not None:
        out = z_arr / (1.0 + a * c)
        return float(out) if scalar and out.ndim == 0 else out
    if _is_plain_absnorm(spec):
        out = _shrink(z_arr, a * spec.slope, spec.dim)
        return float(out) if scalar and out.ndim == 0 else out

    if spec.dim == 1:
        out = _prox_scalar(spec, a, z_arr, p.solver_tol, p.max_iter)
        return float(out) if scalar and out.ndim == 0 else out
    if spec.kind in ("polynomial", "absnorm"):
        # radial V: minimize along the ray through z
        r = np.linalg.norm(z_arr, axis=-1, keepdims=True)
        profile = _radial_profile(spec)
        u = _prox_scalar(profile, a, r.reshape(r.shape[:-1]), p.solver_tol, p.max_iter)
        safe = np.where(r > 0, r, 1.0)
        return z_arr * (u[..., None] / safe)
    raise NotImplementedError(
        f"prox for kind {spec.kind!r} is implemented for d = 1 (or radial kinds) only")


def _radial_profile(spec):
    """d=1 spec whose V matches the radial profile of a radial d>1 spec."""
    if spec.dim == 1:
        return spec
    return PotentialSpec(kind=spec.kind, k1=spec.k1, growth=spec.growth, dim=1,
                         coeffs=spec.coeffs, slope=spec.slope)


def moreau_env(p: ProxProblem, z):
    """Envelope V_a(z) = |J_a(z)-z|^2/(2a) + V(J_a(z)); increases to V as a -> 0."""
    y = prox(p, z)
    z_arr = np.asarray(z, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if p.spec.dim == 1:
        gap = (y_arr - z_arr) ** 2
    else:
        gap = np.sum((y_arr - z_arr) ** 2, axis=-1)
    out = gap / (2.0 * p.alpha) + np.asarray(potentials.eval_V(p.spec, y))
    return float(out) if np.ndim(z) == 0 or (p.spec.dim > 1 and np.ndim(z) == 1) else out


def yosida_grad(p: ProxProblem, z):
    """Regularized gradient (z - J_a(z))/a = d0V evaluated at J_a(z)."""
    y = np.asarray(prox(p, z), dtype=float)
    out = (np.asarray(z, dtype=float) - y) / p.alpha
    scalar = np.ndim(z) == 0 or (p.spec.dim > 1 and np.ndim(z) == 1)
    return float(out) if scalar and out.ndim == 0 else out


def drift(spec: PotentialSpec, z, mode: str = "exact", alpha: float | None = None):
    """Drift b~(z): -d0V(z)/2 for ``exact``, -(d0V)_alpha(z)/2 for ``yosida``.

    The full dissipative drift of the dynamics is -grad~U/2 = -k1 z/2 + b~(z).
    """
    if mode == "exact":
        return -0.5 * potentials.min_section_subgrad_v(spec, z)
    if mode == "yosida":
        if alpha is None:
            raise ValueError("yosida mode needs alpha")
        return -0.5 * yosida_grad(ProxProblem(spec, alpha), z)
    raise ValueError(f"unknown drift mode {mode!r}")


def prox_full_potential(spec: PotentialSpec, lam: float, x):
    """argmin_y |y-x|^2/2 + lam*U(y): backward-Euler step of the full drift.

    Reduces to the V-resolvent: with s = 1 + lam*k1 the optimality condition
    (1+lam*k1) y + lam*d0V(y) = x is y = J_{lam/s}(x/s); requires s > 0.
    """
    s = 1.0 + lam * spec.k1
    if s <= 0:
        raise ValueError("step too large: 1 + lam*k1 must stay positive")
    return prox(ProxProblem(spec, lam / s), np.asarray(x, dtype=float) / s)
