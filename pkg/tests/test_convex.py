import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gibbspath import convex, potentials as pot
from gibbspath.convex import ProxProblem, drift, moreau_env, prox, yosida_grad


ABS = pot.absnorm(k1=1.0, slope=1.0)        # V = |z|
QUAD = pot.polynomial((0.0, 0.0, 0.5), k1=0.0)  # V = z^2/2
COSH = pot.cosh_potential(1.0, 1.0)         # V = cosh z
FREE = pot.free_field(1.0)                  # V = 0


def golden_prox_oracle(spec, alpha, z, tol=1e-12):
    """Independent 1D minimizer of |y-z|^2/(2 alpha) + V(y) by golden section."""
    f = lambda y: (y - z) ** 2 / (2 * alpha) + pot.eval_V(spec, y)
    a, b = z - 10 * (1 + alpha), z + 10 * (1 + alpha)
    invphi = (np.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


class TestProx:
    def test_soft_threshold(self):
        p = ProxProblem(ABS, alpha=0.5)
        assert prox(p, 2.0) == pytest.approx(1.5, abs=1e-12)
        assert prox(p, 0.3) == 0.0
        assert prox(p, -2.0) == pytest.approx(-1.5, abs=1e-12)

    def test_quadratic_resolvent(self):
        p = ProxProblem(QUAD, alpha=1.0)
        assert prox(p, 3.0) == pytest.approx(1.5, rel=1e-14)

    def test_generic_solver_matches_golden_oracle(self):
        # golden section localizes a smooth minimum only to ~sqrt(eps)
        for alpha in (0.05, 0.5, 2.0):
            p = ProxProblem(COSH, alpha=alpha)
            for z in (-2.0, -0.3, 0.0, 1.0, 3.0):
                assert prox(p, z) == pytest.approx(golden_prox_oracle(COSH, alpha, z), abs=5e-8)

    def test_generic_solver_on_kink(self):
        # superposition with a kink exercises the bisection path
        sup = pot.superposition([(1.0, COSH), (1.0, pot.absnorm(0.0, 2.0))])
        p = ProxProblem(sup, alpha=0.5)
        for z in (-3.0, -0.5, 0.0, 0.4, 2.5):
            assert prox(p, z) == pytest.approx(golden_prox_oracle(sup, 0.5, z), abs=5e-8)

    def test_vectorized_matches_scalar(self):
        p = ProxProblem(COSH, alpha=0.3)
        zs = np.linspace(-3, 3, 11)
        vec = prox(p, zs)
        np.testing.assert_allclose(vec, [prox(p, float(z)) for z in zs], rtol=1e-12)

    def test_block_soft_threshold_d2(self):
        p = ProxProblem(pot.absnorm(1.0, 1.0, dim=2), alpha=0.5)
        z = np.array([3.0, 4.0])
        np.testing.assert_allclose(prox(p, z), z * (1 - 0.5 / 5.0), rtol=1e-14)

    def test_d2_nonradial_rejected(self):
        spec = pot.exponential(1.0, [((1.0, 0.0), 1.0)], dim=2)
        with pytest.raises(NotImplementedError):
            prox(ProxProblem(spec, 0.5), np.zeros(2))


class TestMoreauEnv:
    def test_huber(self):
        p = ProxProblem(ABS, alpha=1.0)
        assert moreau_env(p, 3.0) == pytest.approx(2.5, abs=1e-12)
        assert moreau_env(p, 0.5) == pytest.approx(0.125, abs=1e-12)

    def test_quadratic(self):
        p = ProxProblem(QUAD, alpha=1.0)
        assert moreau_env(p, 2.0) == pytest.approx(1.0, rel=1e-13)

    def test_cosh_against_direct_minimization(self):
        p = ProxProblem(COSH, alpha=0.1)
        y = golden_prox_oracle(COSH, 0.1, 1.0)
        direct = (y - 1.0) ** 2 / 0.2 + pot.eval_V(COSH, y)
        assert moreau_env(p, 1.0) == pytest.approx(direct, rel=1e-10)

    def test_below_v(self):
        zs = np.linspace(-3, 3, 31)
        for spec in (ABS, COSH):
            env = np.asarray(moreau_env(ProxProblem(spec, 0.2), zs))
            assert np.all(env <= np.asarray(pot.eval_V(spec, zs)) + 1e-12)

    def test_monotone_in_alpha(self):
        zs = np.linspace(-3, 3, 31)
        for spec in (ABS, COSH):
            prev = np.asarray(pot.eval_V(spec, zs))
            for alpha in (1e-3, 1e-2, 0.1, 1.0, 4.0):
                env = np.asarray(moreau_env(ProxProblem(spec, alpha), zs))
                assert np.all(env <= prev + 1e-12)
                prev = env


class TestYosida:
    def test_clamp(self):
        p = ProxProblem(ABS, alpha=1.0)
        assert yosida_grad(p, 5.0) == pytest.approx(1.0, abs=1e-12)
        assert yosida_grad(p, -0.4) == pytest.approx(-0.4, abs=1e-12)

    def test_quadratic(self):
        p = ProxProblem(QUAD, alpha=1.0)
        assert yosida_grad(p, 2.0) == pytest.approx(1.0, rel=1e-13)

    def test_saturation_small_alpha(self):
        assert yosida_grad(ProxProblem(ABS, 0.25), 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_equals_subgrad_at_prox(self):
        p = ProxProblem(COSH, alpha=0.3)
        zs = np.linspace(-2, 2, 9)
        y = np.asarray(prox(p, zs))
        np.testing.assert_allclose(yosida_grad(p, zs),
                                   pot.min_section_subgrad_v(COSH, y), rtol=1e-8, atol=1e-9)

    def test_domination_and_pointwise_convergence(self):
        zs = np.linspace(-3, 3, 61)
        for spec in (ABS, COSH):
            exact = np.abs(np.asarray(pot.min_section_subgrad_v(spec, zs)))
            defects = []
            for k in range(0, 11):
                ya = np.abs(np.asarray(yosida_grad(ProxProblem(spec, 2.0 ** (-k)), zs)))
                assert np.all(ya <= exact + 1e-9)
                defects.append(np.max(np.abs(ya - exact)))
                if len(defects) > 1 and spec is COSH:
                    assert defects[-1] <= defects[-2] + 1e-12
            assert defects[-1] < defects[0] / 50

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_nonexpansive_and_lipschitz(self, z1, z2):
        p = ProxProblem(ABS, alpha=0.5)
        j1, j2 = prox(p, z1), prox(p, z2)
        assert abs(j1 - j2) <= abs(z1 - z2) + 1e-12
        y1, y2 = yosida_grad(p, z1), yosida_grad(p, z2)
        assert abs(y1 - y2) <= (2 / p.alpha) * abs(z1 - z2) + 1e-12


class TestDrift:
    def test_exact_at_kink(self):
        assert drift(ABS, 0.0, mode="exact") == 0.0

    def test_yosida_clamped(self):
        assert drift(ABS, 5.0, mode="yosida", alpha=1.0) == pytest.approx(-0.5, abs=1e-12)

    def test_free_field_zero(self):
        zs = np.linspace(-4, 4, 9)
        np.testing.assert_allclose(drift(FREE, zs, mode="exact"), 0.0, atol=1e-13)
        np.testing.assert_allclose(drift(FREE, zs, mode="yosida", alpha=0.3), 0.0, atol=1e-13)

    def test_dissipative(self):
        rng = np.random.default_rng(7)
        z1, z2 = rng.normal(size=200) * 3, rng.normal(size=200) * 3
        for mode, alpha in (("exact", None), ("yosida", 0.2)):
            for spec in (ABS, COSH):
                b1 = np.asarray(drift(spec, z1, mode=mode, alpha=alpha))
                b2 = np.asarray(drift(spec, z2, mode=mode, alpha=alpha))
                assert np.all((z1 - z2) * (b1 - b2) <= 1e-10)


class TestProxFullPotential:
    def test_reduction_identity(self):
        # direct minimization of |y-x|^2/2 + lam U(y) for the cosh potential
        lam, x = 0.05, 1.3
        f = lambda y: (y - x) ** 2 / 2 + lam * pot.eval_U(COSH, y)
        ys = np.linspace(-3, 3, 200001)
        brute = ys[np.argmin(f(ys))]
        assert convex.prox_full_potential(COSH, lam, x) == pytest.approx(brute, abs=1e-4)

    def test_absnorm_closed_form(self):
        lam, x = 0.01, 2.0
        s = 1 + lam * ABS.k1
        expect = np.sign(x) * max(abs(x) / s - lam * ABS.slope / s, 0.0)
        assert convex.prox_full_potential(ABS, lam, x) == pytest.approx(expect, rel=1e-13)
