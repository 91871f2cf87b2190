import numpy as np
import pytest

from gibbspath import potentials as pot
from gibbspath import schrodinger as sch


FREE = pot.free_field(1.0)
ABS = pot.absnorm(k1=1.0, slope=1.0)
COSH = pot.cosh_potential(1.0, 1.0)

GRID = sch.ZGrid(half_width=12.0, n=2048)
COSH_GRID = sch.ZGrid(half_width=8.0, n=2048)


def richardson_lambda0(spec, half_width, n):
    """Independent dense-grid oracle: eigenvalues at h and h/2, extrapolated."""
    l1 = sch.ground_state(spec, sch.ZGrid(half_width, n)).lambda0
    l2 = sch.ground_state(spec, sch.ZGrid(half_width, 2 * n + 1)).lambda0
    return (4 * l2 - l1) / 3


class TestAssemble:
    def test_zero_potential_entries(self):
        grid = sch.ZGrid(half_width=2.0, n=3)
        spec = pot.polynomial((0.0,), k1=0.0)
        d, e = sch.assemble(spec, grid)
        h = grid.spacing
        np.testing.assert_allclose(d, 1.0 / h ** 2)
        np.testing.assert_allclose(e, -0.5 / h ** 2)

    def test_harmonic_diagonal(self):
        d, e = sch.assemble(FREE, GRID)
        z = GRID.points()
        np.testing.assert_allclose(d, 1.0 / GRID.spacing ** 2 + 0.5 * z ** 2)

    def test_symmetric(self):
        # tridiagonal with a single off-diagonal vector is symmetric by construction
        d, e = sch.assemble(COSH, COSH_GRID)
        assert d.shape == (COSH_GRID.n,) and e.shape == (COSH_GRID.n - 1,)


class TestGroundState:
    def test_harmonic_eigenvalue(self):
        gs = sch.ground_state(FREE, sch.ZGrid(12.0, 4096))
        assert gs.lambda0 == pytest.approx(0.5, abs=2e-6)

    def test_harmonic_eigenfunction_shape(self):
        gs = sch.ground_state(FREE, GRID)
        z = GRID.points()
        exact = np.pi ** -0.25 * np.exp(-z ** 2 / 2)
        np.testing.assert_allclose(gs.omega, exact, atol=2e-4)

    def test_positive_and_normalized(self):
        for spec, grid in ((FREE, GRID), (ABS, GRID), (COSH, COSH_GRID)):
            gs = sch.ground_state(spec, grid)
            assert np.all(gs.omega > 0)
            assert np.sum(gs.omega ** 2) * grid.spacing == pytest.approx(1.0, abs=1e-10)
            assert gs.lambda0 > float(np.min(pot.eval_U(spec, grid.points())))

    def test_absnorm_lambda0_against_richardson_oracle(self):
        lam = sch.ground_state(ABS, sch.ZGrid(12.0, 4096)).lambda0
        oracle = richardson_lambda0(ABS, 12.0, 8191)
        assert lam == pytest.approx(oracle, abs=2e-6)

    def test_cosh_lambda0_against_richardson_oracle(self):
        lam = sch.ground_state(COSH, sch.ZGrid(8.0, 4096)).lambda0
        oracle = richardson_lambda0(COSH, 8.0, 8191)
        assert lam == pytest.approx(oracle, abs=2e-6)

    def test_wall_too_close_rejected(self):
        with pytest.raises(sch.EigensolverError):
            sch.ground_state(FREE, sch.ZGrid(half_width=2.0, n=256))


class TestSpectrum:
    def test_harmonic_ladder(self):
        # stencil error grows with mode index; n = 8192 keeps mode 3 within 1e-5
        sp = sch.spectrum(FREE, sch.ZGrid(12.0, 8192), k=4)
        np.testing.assert_allclose(sp.eigenvalues, [0.5, 1.5, 2.5, 3.5], atol=1e-5)

    def test_gap(self):
        sp = sch.spectrum(FREE, sch.ZGrid(12.0, 4096), k=2)
        assert sp.eigenvalues[1] - sp.eigenvalues[0] == pytest.approx(1.0, abs=1e-5)

    def test_consistent_with_ground_state(self):
        sp = sch.spectrum(COSH, COSH_GRID, k=3)
        gs = sch.ground_state(COSH, COSH_GRID)
        assert sp.eigenvalues[0] == pytest.approx(gs.lambda0, abs=1e-12)

    def test_orthonormal(self):
        sp = sch.spectrum(COSH, COSH_GRID, k=6)
        gram = sp.eigenvectors.T @ sp.eigenvectors * COSH_GRID.spacing
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-9)

    def test_nondecreasing(self):
        sp = sch.spectrum(ABS, GRID, k=8)
        assert np.all(np.diff(sp.eigenvalues) >= 0)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            sch.spectrum(FREE, sch.ZGrid(5.0, 16), k=17)


class TestLocalInfU:
    def test_radial_monotone(self):
        assert sch.local_inf_U(FREE, 4.0, 2.0) == pytest.approx(2.0, abs=1e-10)

    def test_radius_zero(self):
        assert sch.local_inf_U(COSH, 1.3, 0.0) == pytest.approx(pot.eval_U(COSH, 1.3), rel=1e-14)

    def test_cosh_grid_scan_oracle(self):
        # monotone on [1.5, 4.5]: infimum at the inner edge
        got = sch.local_inf_U(COSH, 3.0, 1.5)
        ys = np.linspace(1.5, 4.5, 200001)
        brute = float(np.min(pot.eval_U(COSH, ys)))
        assert got == pytest.approx(brute, rel=1e-10)
        assert got == pytest.approx(pot.eval_U(COSH, 1.5), rel=1e-9)

    def test_ball_containing_minimum(self):
        assert sch.local_inf_U(FREE, 1.0, 2.0) == pytest.approx(0.0, abs=1e-12)


class TestDecayCheck:
    def test_harmonic_feasible(self):
        gs = sch.ground_state(FREE, GRID)
        rep = sch.decay_check(gs, FREE)
        assert rep.upper_feasible and rep.d2 > 0
        assert rep.lower_feasible and rep.d4 > 0
        assert rep.passed

    def test_cosh_feasible(self):
        gs = sch.ground_state(COSH, COSH_GRID)
        rep = sch.decay_check(gs, COSH)
        assert rep.passed

    def test_insufficient_range(self):
        gs = sch.ground_state(FREE, GRID)
        with pytest.raises(pot.InsufficientRangeError):
            sch.decay_check(gs, FREE, min_abs_z=11.9)


class TestMoreauGroundSequence:
    def test_monotone_and_converging(self):
        grid = sch.ZGrid(12.0, 2048)
        n_list = [1, 2, 4, 8, 16, 32, 64]
        seq = sch.moreau_ground_sequence(ABS, grid, n_list)
        lams = [g.lambda0 for g in seq]
        assert all(l2 >= l1 - 1e-12 for l1, l2 in zip(lams, lams[1:]))
        exact = sch.ground_state(ABS, grid)
        assert all(l <= exact.lambda0 + 1e-10 for l in lams)
        # eigenvalue defect tracks the envelope offset 1/(2N)
        assert exact.lambda0 - lams[-1] == pytest.approx(1 / 128, rel=0.05)

    def test_omega_l2_convergence(self):
        grid = sch.ZGrid(12.0, 2048)
        seq = sch.moreau_ground_sequence(ABS, grid, [4, 64])
        exact = sch.ground_state(ABS, grid)
        d4 = sch.l2_distance(seq[0], exact)
        d64 = sch.l2_distance(seq[1], exact)
        assert d64 < d4
        assert d64 < 1e-3

    def test_smooth_potential_fast_convergence(self):
        grid = sch.ZGrid(8.0, 1024)
        seq = sch.moreau_ground_sequence(COSH, grid, [16, 64, 256])
        exact = sch.ground_state(COSH, grid)
        defects = [exact.lambda0 - g.lambda0 for g in seq]
        assert all(d >= -1e-12 for d in defects)
        assert defects[0] > defects[1] > defects[2] >= 0
        # leading defect is (alpha/2) E[V'^2] under Omega^2, first order in alpha = 1/N
        assert defects[2] < 2e-3
        assert defects[0] / defects[2] == pytest.approx(16.0, rel=0.2)

    def test_requires_positive_k1(self):
        with pytest.raises(ValueError):
            sch.moreau_ground_sequence(pot.absnorm(k1=0.0, slope=1.0), GRID, [2])


class TestGridConvergence:
    def test_second_order_in_spacing(self):
        l1 = sch.ground_state(FREE, sch.ZGrid(12.0, 1024)).lambda0
        l2 = sch.ground_state(FREE, sch.ZGrid(12.0, 2049)).lambda0
        # halving h quarters the error
        assert (0.5 - l1) / (0.5 - l2) == pytest.approx(4.0, rel=0.05)

    def test_richardson_stable(self):
        r1 = richardson_lambda0(FREE, 12.0, 1024)
        r2 = richardson_lambda0(FREE, 12.0, 2048)
        assert abs(r1 - 0.5) < 1e-8 and abs(r2 - 0.5) < 1e-8

    def test_minmax_monotonicity(self):
        # U <= U' pointwise implies lambda0(U) <= lambda0(U')
        grid = sch.ZGrid(12.0, 1024)
        seq = sch.moreau_ground_sequence(ABS, grid, [2, 8])
        exact = sch.ground_state(ABS, grid)
        assert seq[0].lambda0 <= seq[1].lambda0 <= exact.lambda0

    def test_gaussian_domination_uniform_in_n(self):
        # regularized ground states share an n-independent Gaussian envelope
        grid = sch.ZGrid(12.0, 1024)
        z = grid.points()
        c = 0.25  # for k1 = 1 the envelope exp(-c z^2) with c < 1/2 works
        seq = sch.moreau_ground_sequence(ABS, grid, [1, 4, 16, 64])
        d1 = max(2.0 * float(np.max(g.omega)) for g in seq)
        for g in seq:
            assert np.all(g.omega <= d1 * np.exp(-c * z ** 2) + 1e-12)
