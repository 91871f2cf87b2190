"""Potential families U(z) = (K1/2)|z|^2 + V(z) with convex remainder V.

Each family stores its convex-split constant ``k1`` together with growth
metadata (K2, R, alpha) for the coercivity bound U(z) >= K2 |z|^alpha outside
radius R, and (K3, K4, beta) for the gradient bound
|grad~ U(z)| <= K3 exp(K4 |z|^beta).  Here grad~ U = K1 z + d0V with d0V the
minimal section (least-norm element) of the subdifferential of V, so the
families may be non-smooth (the quadratic-plus-|z| family has a kink at 0).

Growth constants are stored hypotheses: :func:`check_growth` validates them on
a grid but never fits them.  Polynomials are radial, sum_j a_j |z|^j, so all
families make sense for d >= 1; non-radial atom families are primarily d = 1.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field


class DimensionMismatchError(ValueError):
    """Input point dimension does not match the potential's dimension."""


class InsufficientRangeError(ValueError):
    """Supplied grid does not reach the region a check needs."""


@dataclass(frozen=True)
class GrowthSpec:
    """Growth-condition constants, stored as hypotheses.

    ``k2, radius, alpha``: coercivity U(z) >= k2 |z|^alpha for |z| > radius.
    ``k3, k4, beta``: |grad~ U(z)| <= k3 exp(k4 |z|^beta), beta < 1 + alpha/2.
    """

    k2: float
    radius: float
    alpha: float
    k3: float
    k4: float
    beta: float

    def __post_init__(self):
        if self.k2 <= 0 or self.radius <= 0 or self.alpha <= 0:
            raise ValueError("k2, radius, alpha must be positive")
        if self.k3 <= 0 or self.k4 <= 0:
            raise ValueError("k3, k4 must be positive")
        if not 0 < self.beta < 1 + self.alpha / 2:
            raise ValueError(
                f"beta={self.beta} must lie in (0, 1 + alpha/2) = (0, {1 + self.alpha / 2})"
            )


@dataclass(frozen=True)
class PotentialSpec:
    """A potential U with its convex decomposition and growth metadata.

    ``kind`` is one of ``polynomial`` (radial, coeffs a_j of |z|^j),
    ``exponential`` (quadratic mass term plus positive exponential atoms),
    ``trigonometric`` (quadratic mass term plus signed cosine atoms),
    ``absnorm`` (quadratic plus slope*|z|) and ``superposition`` (weighted sum).

    Instances are immutable; all evaluation functions are pure.
    """

    kind: str
    k1: float
    growth: GrowthSpec
    dim: int = 1
    coeffs: tuple[float, ...] = ()
    mass: float = 0.0
    atoms: tuple[tuple, ...] = ()  # ((xi, weight), ...); xi scalar for d=1, tuple for d>1
    phase: float = 0.0
    slope: float = 0.0
    parts: tuple[tuple, ...] = ()  # ((weight, PotentialSpec), ...)

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential", "trigonometric", "absnorm", "superposition"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def atom_support_radius(self) -> float:
        """Largest |xi| over stored atoms (the compact-support bound L)."""
        if not self.atoms:
            return 0.0
        return max(float(np.linalg.norm(np.atleast_1d(xi))) for xi, _ in self.atoms)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _default_growth(k2, radius, alpha, k3, k4, beta) -> GrowthSpec:
    return GrowthSpec(k2=k2, radius=radius, alpha=alpha, k3=k3, k4=k4, beta=beta)


def polynomial(coeffs, k1: float, growth: GrowthSpec | None = None, dim: int = 1) -> PotentialSpec:
    """Radial polynomial U(z) = sum_j coeffs[j] |z|^j with declared split constant k1.

    A negative leading coefficient is allowed as data (check_growth will fail it).
    """
    coeffs = tuple(float(c) for c in coeffs)
    if growth is None:
        lead = coeffs[-1] if coeffs else 0.0
        deg = len(coeffs) - 1
        growth = _default_growth(
            k2=max(lead / 2, 1e-8), radius=_poly_growth_radius(coeffs), alpha=max(deg, 1),
            k3=sum(abs(c) * max(j, 1) for j, c in enumerate(coeffs)) + abs(k1) + 1.0,
            k4=1.0, beta=1.0,
        )
    return PotentialSpec(kind="polynomial", k1=float(k1), growth=growth, dim=dim, coeffs=coeffs)


def _poly_growth_radius(coeffs) -> float:
    # radius beyond which the leading term dominates twice the sum of the others
    if len(coeffs) <= 1:
        return 1.0
    lead = abs(coeffs[-1]) or 1.0
    return max(1.0, 2.0 * sum(abs(c) for c in coeffs[:-1]) / lead + 1.0)


def free_field(mass: float, dim: int = 1) -> PotentialSpec:
    """U(z) = (m^2/2)|z|^2: the Gaussian case, V identically zero."""
    m2 = mass * mass
    growth = _default_growth(k2=m2 / 2, radius=1.0, alpha=2.0, k3=m2 + 1.0, k4=1.0, beta=1.0)
    return PotentialSpec(kind="polynomial", k1=m2, growth=growth, dim=dim,
                         coeffs=(0.0, 0.0, m2 / 2))


def exponential(mass: float, atoms, dim: int = 1, growth: GrowthSpec | None = None) -> PotentialSpec:
    """U(z) = (m^2/2)|z|^2 + sum_i w_i exp(<xi_i, z>) with w_i > 0, |xi_i| <= L.

    Strictly convex with k1 = m^2; default growth constants follow the
    closed-form bounds |U| and |grad U| admit for compactly supported atoms.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    atoms = tuple((_as_atom_point(xi, dim), float(w)) for xi, w in atoms)
    if any(w <= 0 for _, w in atoms):
        raise ValueError("exponential atom weights must be positive")
    m2 = mass * mass
    if growth is None:
        L = max((float(np.linalg.norm(np.atleast_1d(xi))) for xi, _ in atoms), default=0.0)
        nu_total = sum(w for _, w in atoms)
        if L > 0:
            k3, k4 = m2 / L + L * nu_total, L
        else:
            k3, k4 = m2 + nu_total + 1.0, 1.0
        growth = _default_growth(k2=m2 / 2, radius=1.0, alpha=2.0, k3=k3, k4=max(k4, 1e-8), beta=1.0)
    return PotentialSpec(kind="exponential", k1=m2, growth=growth, dim=dim, mass=mass, atoms=atoms)


def cosh_potential(mass: float, a: float, weight: float = 0.5) -> PotentialSpec:
    """U(z) = (m^2/2) z^2 + 2*weight*cosh(a z): the symmetric two-atom exponential."""
    return exponential(mass, [(-a, weight), (a, weight)])


def trigonometric(mass: float, atoms, phase: float = 0.0, dim: int = 1,
                  growth: GrowthSpec | None = None) -> PotentialSpec:
    """U(z) = (m^2/2)|z|^2 + sum_i w_i cos(<xi_i, z> + phase), signed weights.

    The Hessian obeys Hess U >= m^2 - K(nu) with K(nu) = sum |w_i||xi_i|^2, so
    the stored split constant is k1 = m^2 - K(nu) and V picks up the
    complementary quadratic (K(nu)/2)|z|^2, keeping it convex.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    atoms = tuple((_as_atom_point(xi, dim), float(w)) for xi, w in atoms)
    k_nu = sum(abs(w) * float(np.sum(np.square(np.atleast_1d(xi)))) for xi, w in atoms)
    m2 = mass * mass
    if growth is None:
        nu_abs = sum(abs(w) for _, w in atoms)
        k3 = m2 + np.sqrt(max(k_nu, 0.0) * max(nu_abs, 1e-300)) + 1.0
        growth = _default_growth(k2=m2 / 4, radius=_trig_growth_radius(m2, nu_abs), alpha=2.0,
                                 k3=k3, k4=1.0, beta=1.0)
    return PotentialSpec(kind="trigonometric", k1=m2 - k_nu, growth=growth, dim=dim,
                         mass=mass, atoms=atoms, phase=phase)


def _trig_growth_radius(m2, nu_abs) -> float:
    # beyond R the quadratic dominates the bounded cosine part: m2 r^2/2 - nu >= m2 r^2/4
    return max(1.0, 2.0 * np.sqrt(max(nu_abs, 1e-300) / m2))


def absnorm(k1: float, slope: float, dim: int = 1, growth: GrowthSpec | None = None) -> PotentialSpec:
    """U(z) = (k1/2)|z|^2 + slope*|z|: the canonical non-smooth family."""
    if slope < 0:
        raise ValueError("slope must be nonnegative")
    if growth is None:
        growth = _default_growth(k2=max(k1 / 2, 1e-8), radius=1.0, alpha=2.0,
                                 k3=abs(k1) + slope + 1.0, k4=1.0, beta=1.0)
    return PotentialSpec(kind="absnorm", k1=float(k1), growth=growth, dim=dim, slope=float(slope))


def superposition(parts, growth: GrowthSpec | None = None) -> PotentialSpec:
    """Weighted sum U = sum_i w_i U_i with w_i >= 0; k1 adds linearly.

    Default growth constants are conservative combinations of the parts'.
    """
    parts = tuple((float(w), p) for w, p in parts)
    if not parts:
        raise ValueError("superposition needs at least one part")
    if any(w < 0 for w, _ in parts):
        raise ValueError("superposition weights must be nonnegative")
    dims = {p.dim for _, p in parts}
    if len(dims) != 1:
        raise DimensionMismatchError("superposition parts must share one dimension")
    k1 = sum(w * p.k1 for w, p in parts)
    if growth is None:
        alpha = min(p.growth.alpha for _, p in parts)
        k2 = sum(w * p.growth.k2 for w, p in parts)
        radius = max(max(p.growth.radius for _, p in parts), 1.0)
        k3 = sum(w * p.growth.k3 * np.exp(p.growth.k4) for w, p in parts) + 1.0
        k4 = max(p.growth.k4 for _, p in parts)
        beta = max(p.growth.beta for _, p in parts)
        growth = _default_growth(k2=max(k2, 1e-12), radius=radius, alpha=alpha, k3=k3, k4=k4, beta=beta)
    return PotentialSpec(kind="superposition", k1=k1, growth=growth, dim=dims.pop(), parts=parts)


def _as_atom_point(xi, dim):
    if dim == 1:
        return float(np.asarray(xi).reshape(()))
    arr = tuple(float(v) for v in np.atleast_1d(xi))
    if len(arr) != dim:
        raise DimensionMismatchError(f"atom point has length {len(arr)}, expected {dim}")
    return arr


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _prep(spec: PotentialSpec, z):
    """Validate and normalize input; returns (z array, |z|, scalar_flag)."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite input point")
    if spec.dim == 1:
        return z, np.abs(z), z.ndim == 0
    if z.shape[-1:] != (spec.dim,):
        raise DimensionMismatchError(f"expected trailing axis of length {spec.dim}, got shape {z.shape}")
    return z, np.linalg.norm(z, axis=-1), z.ndim == 1


def _ret(out, scalar):
    out = np.asarray(out)
    return float(out) if scalar and out.ndim == 0 else out


def eval_U(spec: PotentialSpec, z):
    """Evaluate U(z); scalar in gives scalar out, arrays are elementwise (d=1)."""
    z, r, scalar = _prep(spec, z)
    return _ret(_eval_u(spec, z, r), scalar)


def _eval_u(spec, z, r):
    if spec.kind == "polynomial":
        out = np.zeros_like(r)
        for j in range(len(spec.coeffs) - 1, -1, -1):
            out = out * r + spec.coeffs[j]
        return out
    if spec.kind == "absnorm":
        return 0.5 * spec.k1 * r * r + spec.slope * r
    if spec.kind == "exponential":
        out = 0.5 * spec.mass ** 2 * r * r
        for xi, w in spec.atoms:
            out = out + w * np.exp(_dot(spec, xi, z))
        return out
    if spec.kind == "trigonometric":
        out = 0.5 * spec.mass ** 2 * r * r
        for xi, w in spec.atoms:
            out = out + w * np.cos(_dot(spec, xi, z) + spec.phase)
        return out
    # superposition
    out = np.zeros_like(r)
    for w, p in spec.parts:
        out = out + w * _eval_u(p, z, r)
    return out


def _dot(spec, xi, z):
    if spec.dim == 1:
        return xi * z
    return z @ np.asarray(xi)


def eval_V(spec: PotentialSpec, z):
    """The convex remainder V(z) = U(z) - (k1/2)|z|^2."""
    z, r, scalar = _prep(spec, z)
    return _ret(_eval_u(spec, z, r) - 0.5 * spec.k1 * r * r, scalar)


def _grad_smooth_and_kink(spec, z, r):
    """Gradient of U away from the origin, plus the |z|-kink radius at 0.

    Uses unit(0) = 0, so at r == 0 the returned array holds the smooth part of
    the gradient there; kinks occur only at the origin in these families.
    """
    if spec.kind == "polynomial":
        s = np.zeros_like(r)
        for j in range(len(spec.coeffs) - 1, 0, -1):
            s = s * r + j * spec.coeffs[j]  # sum_j j a_j r^{j-1}
        kink = spec.coeffs[1] if len(spec.coeffs) > 1 else 0.0
        return _along_unit(spec, s, z, r), float(kink)
    if spec.kind == "absnorm":
        return _along_unit(spec, spec.k1 * r + spec.slope, z, r), float(spec.slope)
    if spec.kind == "exponential":
        g = spec.mass ** 2 * z.copy()
        for xi, w in spec.atoms:
            e = w * np.exp(_dot(spec, xi, z))
            g = g + (e * xi if spec.dim == 1 else e[..., None] * np.asarray(xi))
        return g, 0.0
    if spec.kind == "trigonometric":
        g = spec.mass ** 2 * z.copy()
        for xi, w in spec.atoms:
            s = w * np.sin(_dot(spec, xi, z) + spec.phase)
            g = g - (s * xi if spec.dim == 1 else s[..., None] * np.asarray(xi))
        return g, 0.0
    # superposition
    g = np.zeros_like(z)
    kink = 0.0
    for w, p in spec.parts:
        gp, kp = _grad_smooth_and_kink(p, z, r)
        g = g + w * gp
        kink += w * kp
    return g, kink


def _along_unit(spec, s, z, r):
    """Radial gradient s(r) * unit(z), with unit(0) = 0."""
    if spec.dim == 1:
        return s * np.sign(z)
    safe = np.where(r > 0, r, 1.0)
    unit = np.where(r[..., None] > 0, z / safe[..., None], 0.0)
    return s[..., None] * unit


def _shrink(g, kink, dim):
    """Least-norm element of g + kink*unit-ball (block soft threshold)."""
    if kink <= 0:
        return g
    if dim == 1:
        return np.sign(g) * np.maximum(np.abs(g) - kink, 0.0)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    scale = np.where(norm > 0, np.maximum(norm - kink, 0.0) / np.where(norm > 0, norm, 1.0), 0.0)
    return g * scale


def min_section_grad(spec: PotentialSpec, z):
    """grad~ U(z) = k1 z + d0V(z); classical gradient at smooth points.

    At the origin of a kinked family, returns k1*0 plus the least-norm
    subgradient of V there.
    """
    z, r, scalar = _prep(spec, z)
    g, kink = _grad_smooth_and_kink(spec, z, r)
    if kink > 0:
        at0 = r == 0
        if np.any(at0):
            g = np.where(_bc(at0, g, spec), _shrink(g, kink, spec.dim), g)
    return _ret(g, scalar)


def min_section_subgrad_v(spec: PotentialSpec, z):
    """d0V(z): the minimal section of the subdifferential of the convex part."""
    z, r, scalar = _prep(spec, z)
    g, kink = _grad_smooth_and_kink(spec, z, r)
    gv = g - spec.k1 * z
    if kink > 0:
        at0 = r == 0
        if np.any(at0):
            gv = np.where(_bc(at0, gv, spec), _shrink(gv, kink, spec.dim), gv)
    return _ret(gv, scalar)


def _bc(mask, arr, spec):
    if spec.dim == 1:
        return mask
    return mask[..., None]


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

@dataclass
class GrowthReport:
    """Per-point verdicts for the coercivity and gradient-growth bounds."""

    z: np.ndarray
    coercive_ok: np.ndarray    # over points with |z| > radius
    coercive_points: np.ndarray
    gradient_ok: np.ndarray    # over all grid points
    passed: bool
    worst_coercive_margin: float
    worst_gradient_margin: float


def check_growth(spec: PotentialSpec, grid) -> GrowthReport:
    """Verify U(z) >= k2 |z|^alpha for |z| > R and |grad~ U| <= k3 exp(k4 |z|^beta).

    The grid must reach beyond R; margins are reported as (bound - value) for
    the gradient side and (value - bound) for the coercive side, so positive
    margins mean the hypothesis holds with slack.
    """
    z = np.asarray(grid, dtype=float)
    if z.size == 0:
        raise ValueError("empty grid")
    g = spec.growth
    r = np.abs(z) if spec.dim == 1 else np.linalg.norm(z, axis=-1)
    outside = r > g.radius
    if not np.any(outside):
        raise InsufficientRangeError(
            f"grid must extend beyond radius {g.radius}, max |z| = {r.max():.3g}")
    u = np.asarray(eval_U(spec, z))
    tol = 1e-12 * np.maximum(1.0, np.abs(u))
    coercive_margin = u - g.k2 * r ** g.alpha
    coercive_ok = coercive_margin[outside] >= -tol[outside]

    grad = np.asarray(min_section_grad(spec, z))
    gnorm = np.abs(grad) if spec.dim == 1 else np.linalg.norm(grad, axis=-1)
    bound = g.k3 * np.exp(g.k4 * r ** g.beta)
    grad_margin = bound - gnorm
    gradient_ok = grad_margin >= -1e-12 * np.maximum(1.0, bound)

    return GrowthReport(
        z=z,
        coercive_ok=coercive_ok,
        coercive_points=z[outside] if spec.dim == 1 else z[outside],
        gradient_ok=gradient_ok,
        passed=bool(np.all(coercive_ok) and np.all(gradient_ok)),
        worst_coercive_margin=float(coercive_margin[outside].min()),
        worst_gradient_margin=float(grad_margin.min()),
    )


def midpoint_convexity_defect(spec: PotentialSpec, grid) -> float:
    """max over grid pairs of V((x+y)/2) - (V(x)+V(y))/2; <= ~0 iff V midpoint convex.

    d = 1 only; pairs are adjacent-scale combinations of the supplied grid.
    """
    z = np.sort(np.asarray(grid, dtype=float))
    v = np.asarray(eval_V(spec, z))
    defect = -np.inf
    for stride in (1, 2, 4, 8):
        if 2 * stride >= z.size:
            break
        x, y = z[:-2 * stride], z[2 * stride:]
        vm = np.asarray(eval_V(spec, (x + y) / 2))
        defect = max(defect, float(np.max(vm - 0.5 * (v[:-2 * stride] + v[2 * stride:]))))
    return defect


# ---------------------------------------------------------------------------
# serialization (schema documented in the harness module)
# ---------------------------------------------------------------------------

def to_json_dict(spec: PotentialSpec) -> dict:
    g = spec.growth
    params: dict = {}
    if spec.kind == "polynomial":
        params["coeffs"] = list(spec.coeffs)
    elif spec.kind in ("exponential", "trigonometric"):
        params["mass"] = spec.mass
        params["atoms"] = [[list(np.atleast_1d(xi).astype(float)), w] for xi, w in spec.atoms]
        if spec.kind == "trigonometric":
            params["phase"] = spec.phase
    elif spec.kind == "absnorm":
        params["slope"] = spec.slope
    else:
        params["parts"] = [[w, to_json_dict(p)] for w, p in spec.parts]
    return {
        "kind": spec.kind,
        "k1": spec.k1,
        "dim": spec.dim,
        "growth": {"k2": g.k2, "radius_R": g.radius, "alpha_growth": g.alpha,
                   "k3": g.k3, "k4": g.k4, "beta_growth": g.beta},
        "parameters": params,
    }


def from_json_dict(d: dict) -> PotentialSpec:
    g = d["growth"]
    growth = GrowthSpec(k2=g["k2"], radius=g["radius_R"], alpha=g["alpha_growth"],
                        k3=g["k3"], k4=g["k4"], beta=g["beta_growth"])
    kind, dim, params = d["kind"], int(d.get("dim", 1)), d["parameters"]
    if kind == "polynomial":
        return PotentialSpec(kind=kind, k1=d["k1"], growth=growth, dim=dim,
                             coeffs=tuple(params["coeffs"]))
    if kind in ("exponential", "trigonometric"):
        atoms = tuple((_as_atom_point(xi if dim > 1 else xi[0], dim), w)
                      for xi, w in params["atoms"])
        return PotentialSpec(kind=kind, k1=d["k1"], growth=growth, dim=dim,
                             mass=params["mass"], atoms=atoms,
                             phase=params.get("phase", 0.0))
    if kind == "absnorm":
        return PotentialSpec(kind=kind, k1=d["k1"], growth=growth, dim=dim, slope=params["slope"])
    if kind == "superposition":
        parts = tuple((w, from_json_dict(p)) for w, p in params["parts"])
        return PotentialSpec(kind=kind, k1=d["k1"], growth=growth, dim=dim, parts=parts)
    raise ValueError(f"unknown potential kind {kind!r}")
