import numpy as np
import pytest
from hypothesis import given, strategies as st

from gibbspath import potentials as pot


COSH = pot.cosh_potential(mass=1.0, a=1.0)
ABS1 = pot.absnorm(k1=1.0, slope=1.0)
FREE = pot.free_field(mass=1.0)


def high_precision_cosh(x, terms=40):
    # series oracle: cosh x = sum x^{2k}/(2k)!
    total, term = 0.0, 1.0
    for k in range(terms):
        total += term
        term *= x * x / ((2 * k + 1) * (2 * k + 2))
    return total


class TestEvalU:
    def test_cosh_at_zero(self):
        assert pot.eval_U(COSH, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_cosh_general(self):
        zs = np.linspace(-3, 3, 41)
        np.testing.assert_allclose(pot.eval_U(COSH, zs), zs ** 2 / 2 + np.cosh(zs), rtol=1e-14)

    def test_absnorm_value(self):
        assert pot.eval_U(ABS1, -3.0) == pytest.approx(7.5, abs=1e-15)

    def test_superposition_linear(self):
        sup = pot.superposition([(0.7, COSH), (1.3, ABS1)])
        zs = np.linspace(-2, 2, 17)
        expect = 0.7 * np.asarray(pot.eval_U(COSH, zs)) + 1.3 * np.asarray(pot.eval_U(ABS1, zs))
        np.testing.assert_allclose(pot.eval_U(sup, zs), expect, rtol=1e-15)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            pot.eval_U(FREE, np.nan)

    def test_dim_mismatch(self):
        spec2 = pot.absnorm(1.0, 1.0, dim=2)
        with pytest.raises(pot.DimensionMismatchError):
            pot.eval_U(spec2, np.zeros(3))


class TestEvalV:
    def test_free_field_zero(self):
        zs = np.linspace(-5, 5, 33)
        np.testing.assert_allclose(pot.eval_V(FREE, zs), 0.0, atol=1e-13)

    def test_cosh_value_oracle(self):
        assert pot.eval_V(COSH, 1.0) == pytest.approx(high_precision_cosh(1.0), rel=1e-14)
        assert pot.eval_V(COSH, 1.0) == pytest.approx(1.5430806348152437, rel=1e-13)

    def test_absnorm_zero(self):
        assert pot.eval_V(ABS1, 0.0) == 0.0


class TestMinSectionGrad:
    def test_absnorm_at_kink(self):
        assert pot.min_section_grad(ABS1, 0.0) == 0.0

    def test_absnorm_away(self):
        assert pot.min_section_grad(ABS1, 2.0) == pytest.approx(3.0, abs=1e-15)

    def test_cosh_symbolic(self):
        # d/dz (z^2/2 + cosh z) = z + sinh z
        assert pot.min_section_grad(COSH, 1.0) == pytest.approx(1.0 + np.sinh(1.0), rel=1e-14)

    def test_matches_central_differences(self):
        eps = 1e-6
        for spec in (COSH, FREE, pot.trigonometric(1.0, [(0.5, 1.0)], phase=0.3)):
            zs = np.linspace(-2.5, 2.5, 21)
            fd = (np.asarray(pot.eval_U(spec, zs + eps)) - np.asarray(pot.eval_U(spec, zs - eps))) / (2 * eps)
            np.testing.assert_allclose(pot.min_section_grad(spec, zs), fd, rtol=2e-6, atol=2e-6)

    def test_absnorm_subgradient_bound(self):
        zs = np.linspace(-4, 4, 101)
        g = np.asarray(pot.min_section_grad(ABS1, zs))
        assert np.all(np.abs(g - ABS1.k1 * zs) <= ABS1.slope + 1e-14)

    def test_superposition_kink_shrink(self):
        # exp part has smooth dV(0) = sinh(0) = 0 after sign pairing; shift one atom
        skew = pot.exponential(1.0, [(1.0, 1.0)])  # V = e^z, dV(0) = 1
        sup = pot.superposition([(1.0, skew), (1.0, pot.absnorm(0.0, 2.0))])
        # at 0 the subdifferential is 1 + [-2, 2]; least-norm element is 0
        assert pot.min_section_grad(sup, 0.0) == pytest.approx(0.0, abs=1e-14)
        big = pot.superposition([(3.0, skew), (1.0, pot.absnorm(0.0, 2.0))])
        # 3 + [-2, 2] has least-norm element 1
        assert pot.min_section_grad(big, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_radial_d2(self):
        spec2 = pot.absnorm(1.0, 1.0, dim=2)
        z = np.array([3.0, 4.0])
        g = pot.min_section_grad(spec2, z)
        np.testing.assert_allclose(g, z + z / 5.0, rtol=1e-14)
        np.testing.assert_allclose(pot.min_section_grad(spec2, np.zeros(2)), 0.0)


class TestMidpointConvexity:
    @pytest.mark.parametrize("spec", [FREE, COSH, ABS1,
                                      pot.trigonometric(1.0, [(0.5, 1.0)]),
                                      pot.polynomial((0.0, 0.0, 0.0, 0.0, 1.0), k1=0.0)])
    def test_v_midpoint_convex(self, spec):
        grid = np.linspace(-4, 4, 401)
        assert pot.midpoint_convexity_defect(spec, grid) <= 1e-12


class TestCheckGrowth:
    def test_free_field_passes(self):
        grid = np.arange(-5, 5.0001, 0.1)
        spec = pot.polynomial((0.0, 0.0, 0.5), k1=1.0,
                              growth=pot.GrowthSpec(k2=0.5, radius=1.0, alpha=2.0,
                                                    k3=2.0, k4=1.0, beta=1.0))
        rep = pot.check_growth(spec, grid)
        assert rep.passed

    def test_cosh_passes_with_paper_constants(self):
        # m=1, atoms +-1 weight 1/2: K2 = m^2/2, alpha = 2, K3 = m^2/L + L nu = 2, K4 = L = 1, beta = 1
        rep = pot.check_growth(COSH, np.arange(-6, 6.0001, 0.05))
        assert COSH.growth.beta == 1.0
        assert rep.passed

    def test_negative_leading_coefficient_fails(self):
        spec = pot.polynomial((0.0, 0.0, 1.0, 0.0, -0.1), k1=2.0,
                              growth=pot.GrowthSpec(k2=0.5, radius=2.0, alpha=2.0,
                                                    k3=100.0, k4=1.0, beta=1.0))
        rep = pot.check_growth(spec, np.arange(-12, 12.001, 0.1))
        assert not rep.passed

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            pot.check_growth(FREE, np.array([]))

    def test_insufficient_range(self):
        with pytest.raises(pot.InsufficientRangeError):
            pot.check_growth(FREE, np.linspace(-0.5, 0.5, 11))


class TestSerialization:
    @pytest.mark.parametrize("spec", [FREE, COSH, ABS1,
                                      pot.trigonometric(1.0, [(0.5, 1.0)], phase=0.2),
                                      pot.superposition([(0.5, COSH), (0.5, ABS1)])])
    def test_round_trip(self, spec):
        back = pot.from_json_dict(pot.to_json_dict(spec))
        assert back == spec

    def test_invariants_rejected(self):
        with pytest.raises(ValueError):
            pot.GrowthSpec(k2=1.0, radius=1.0, alpha=2.0, k3=1.0, k4=1.0, beta=2.5)
        with pytest.raises(ValueError):
            pot.exponential(1.0, [(1.0, -0.5)])


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_absnorm_grad_monotone(z1, z2):
    # minimal section of a convex function is monotone
    g1 = pot.min_section_grad(ABS1, z1)
    g2 = pot.min_section_grad(ABS1, z2)
    assert (z1 - z2) * (g1 - g2) >= -1e-12
