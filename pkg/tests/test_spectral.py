"""Transform, derivative, Poisson, and dealiasing contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epdecay import (
    ChargeImbalanceError,
    FluidState,
    Grid,
    RealField,
    SpectralError,
    SpectralField,
    dealias,
    derivative,
    gradient,
    laplacian,
    poisson_solve,
    to_real,
    to_spectral,
)
from conftest import cos_x1, random_real_field


class TestGrid:
    def test_invariants_enforced(self):
        with pytest.raises(SpectralError):
            Grid(6)
        with pytest.raises(SpectralError):
            Grid(17)
        with pytest.raises(SpectralError):
            Grid(16, box_length=-1.0)

    def test_zero_frequency_unique(self, grid16):
        k2 = grid16.k_squared
        assert np.count_nonzero(k2 == 0.0) == 1

    def test_frequency_lattice_spacing(self):
        g = Grid(16, box_length=100.0)
        xi = np.sort(np.unique(np.abs(g.wavenumbers[0])))
        assert xi[0] == 0.0
        assert xi[1] == pytest.approx(2.0 * np.pi / 100.0, rel=1e-14)

    def test_dealias_mask_cuts_top_third(self, grid16):
        # |k_j| > n/3 (here 5.33) must be gone, |k_j| <= 5 kept
        kept = grid16.dealias_mask
        assert kept[grid16.mode_index((5, 0, 0))]
        assert not kept[grid16.mode_index((6, 0, 0))]
        assert not kept[grid16.mode_index((0, 0, 8))]


class TestTransform:
    def test_constant_field_dc_mode(self, grid16):
        c = 2.75
        F = to_spectral(RealField(grid16, np.full(grid16.shape, c)))
        dc = F.mode((0, 0, 0))
        assert dc == pytest.approx(c * np.sqrt(grid16.volume), rel=1e-14)
        rest = np.abs(F.coefficients).sum() - abs(dc)
        assert rest < 1e-10 * abs(dc)

    def test_single_mode_pair(self, grid16):
        F = to_spectral(cos_x1(grid16))
        plus, minus = F.mode((1, 0, 0)), F.mode((-1, 0, 0))
        assert abs(plus) == pytest.approx(abs(minus), rel=1e-14)
        # cos = (e^{ix} + e^{-ix})/2 with unit-Parseval scaling
        assert abs(plus) == pytest.approx(np.sqrt(grid16.volume) / 2.0, rel=1e-13)
        others = np.abs(F.coefficients).sum() - abs(plus) - abs(minus)
        assert others < 1e-10 * abs(plus)

    def test_round_trip(self, grid16, rng):
        f = random_real_field(grid16, rng)
        back = to_real(to_spectral(f))
        scale = np.max(np.abs(f.values))
        assert np.max(np.abs(back.values - f.values)) < 1e-12 * scale

    def test_hermitian_symmetry(self, grid16, rng):
        F = to_spectral(random_real_field(grid16, rng))
        assert F.hermitian_defect() < 1e-12 * np.max(np.abs(F.coefficients))

    def test_rejects_non_finite(self, grid16):
        v = np.zeros(grid16.shape)
        v[0, 0, 0] = np.nan
        with pytest.raises(SpectralError):
            RealField(grid16, v)

    def test_parseval(self, grid16, rng):
        from epdecay import lp_norm, hdot_norm

        f = random_real_field(grid16, rng)
        phys = lp_norm(f, 2)
        spec = hdot_norm(to_spectral(f), 0.0)
        assert abs(phys - spec) <= 1e-12 * phys

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 2**16))
    def test_linearity(self, a, b, seed):
        g = Grid(8)
        r = np.random.default_rng(seed)
        f1, f2 = (random_real_field(g, r) for _ in range(2))
        lhs = to_spectral(RealField(g, a * f1.values + b * f2.values))
        rhs = a * to_spectral(f1).coefficients + b * to_spectral(f2).coefficients
        scale = max(np.max(np.abs(rhs)), 1e-30)
        assert np.max(np.abs(lhs.coefficients - rhs)) <= 1e-12 * scale


class TestDerivative:
    def test_d1_cos_is_minus_sin(self, grid16):
        X = np.broadcast_to(grid16.coordinates[0], grid16.shape)
        d = to_real(derivative(to_spectral(cos_x1(grid16)), (1, 0, 0)))
        assert np.max(np.abs(d.values + np.sin(X))) < 1e-12

    def test_gradient_of_constant_is_zero(self, grid16):
        F = to_spectral(RealField(grid16, np.full(grid16.shape, 3.3)))
        gv = to_real(gradient(F)).values
        assert np.max(np.abs(gv)) < 1e-12

    def test_mixed_partial_matches_analytic(self):
        # d1 d2 exp(sin x1 + sin x2) = cos x1 cos x2 exp(sin x1 + sin x2)
        g = Grid(32)
        X, Y, _ = (np.broadcast_to(c, g.shape) for c in g.coordinates)
        f = RealField(g, np.exp(np.sin(X) + np.sin(Y)))
        num = to_real(derivative(to_spectral(f), (1, 1, 0))).values
        exact = np.cos(X) * np.cos(Y) * np.exp(np.sin(X) + np.sin(Y))
        assert np.max(np.abs(num - exact)) < 1e-10

    def test_order_cap(self, grid16):
        F = to_spectral(cos_x1(grid16))
        with pytest.raises(SpectralError):
            derivative(F, (3, 2, 0))
        derivative(F, (3, 2, 0), max_order=5)

    def test_nyquist_plane_zeroed(self, grid16):
        coeff = np.zeros(grid16.shape, dtype=complex)
        coeff[grid16.mode_index((8, 0, 0))] = 1.0  # pure Nyquist mode
        F = SpectralField(grid16, coeff)
        d = derivative(F, (1, 0, 0))
        assert np.max(np.abs(d.coefficients)) == 0.0

    def test_spectral_accuracy_doubling(self):
        # analytic test function: error must fall by >= 100x from n=16 to 32
        errs = {}
        for n in (16, 32):
            g = Grid(n)
            X = np.broadcast_to(g.coordinates[0], g.shape)
            f = RealField(g, np.exp(np.sin(X)))
            num = to_real(derivative(to_spectral(f), (1, 0, 0))).values
            errs[n] = np.max(np.abs(num - np.cos(X) * np.exp(np.sin(X))))
        assert errs[16] / max(errs[32], 1e-300) >= 1e2


class TestPoisson:
    def test_cosine_source(self, grid16):
        X = np.broadcast_to(grid16.coordinates[0], grid16.shape)
        phi = poisson_solve(to_spectral(cos_x1(grid16)))
        assert np.max(np.abs(to_real(phi).values + np.cos(X))) < 1e-12
        gphi = to_real(gradient(phi)).values
        assert np.max(np.abs(gphi[0] - np.sin(X))) < 1e-12
        assert np.max(np.abs(gphi[1:])) < 1e-12

    def test_zero_source(self, grid16):
        phi = poisson_solve(SpectralField.zeros(grid16))
        assert np.max(np.abs(phi.coefficients)) == 0.0

    def test_laplacian_recovers_source(self, grid16, rng):
        f = random_real_field(grid16, rng, zero_mean=True)
        F = to_spectral(f)
        recovered = laplacian(poisson_solve(F)).coefficients
        scale = np.max(np.abs(F.coefficients))
        assert np.max(np.abs(recovered - F.coefficients)) < 1e-12 * scale

    def test_charge_imbalance_rejected(self, grid16):
        F = to_spectral(RealField(grid16, np.full(grid16.shape, 1.0)))
        with pytest.raises(ChargeImbalanceError):
            poisson_solve(F)

    def test_disparity_identity_lattice_equality(self, grid16, rng):
        # |grad^k source| = |grad^k Lap(phi)| = |grad^{k+1} grad(phi)| exactly
        # on Nyquist-free content (differential operators zero those planes)
        from epdecay import hdot_norm

        f = random_real_field(grid16, rng, zero_mean=True)
        F = to_spectral(f)
        F = SpectralField(grid16, F.coefficients * grid16.nyquist_mask)
        phi = poisson_solve(F)
        for k in range(3):
            a = hdot_norm(F, float(k))
            b = hdot_norm(laplacian(phi), float(k))
            c = hdot_norm(gradient(phi), float(k + 1))
            assert abs(a - b) <= 1e-12 * a
            assert abs(b - c) <= 1e-12 * a


class TestDealias:
    def test_band_limited_unchanged(self, grid16):
        F = dealias(to_spectral(cos_x1(grid16)))  # exactly supported in-band
        assert np.array_equal(dealias(F).coefficients, F.coefficients)

    def test_near_nyquist_mode_removed(self, grid16):
        X = np.broadcast_to(grid16.coordinates[0], grid16.shape)
        k = grid16.n_points // 2 - 1
        F = to_spectral(RealField(grid16, np.cos(k * X)))
        assert np.max(np.abs(dealias(F).coefficients)) < 1e-12

    def test_product_of_dealiased_modes_exact(self, grid16):
        # cos(k x) cos(k' y) -> four exact corner coefficients at (±k, ±k')
        X, Y, _ = (np.broadcast_to(c, grid16.shape) for c in grid16.coordinates)
        f1 = RealField(grid16, np.cos(2 * X))
        f2 = RealField(grid16, np.cos(3 * Y))
        prod = to_spectral(RealField(grid16, f1.values * f2.values))
        expect = np.sqrt(grid16.volume) / 4.0
        for kx in (2, -2):
            for ky in (3, -3):
                assert abs(prod.mode((kx, ky, 0))) == pytest.approx(expect, rel=1e-12)
        total = np.sum(np.abs(prod.coefficients))
        assert total == pytest.approx(4 * expect, rel=1e-11)


class TestConcurrency:
    def test_parallel_calls_on_distinct_fields(self, grid16):
        # operations are pure; concurrent use on distinct fields must agree
        # with sequential results
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(99)
        fields = [random_real_field(grid16, rng, zero_mean=True) for _ in range(12)]

        def work(f):
            F = to_spectral(f)
            return (to_real(derivative(F, (1, 0, 0))).values.sum(),
                    to_real(poisson_solve(F)).values.sum())

        sequential = [work(f) for f in fields]
        with ThreadPoolExecutor(max_workers=4) as pool:
            parallel = list(pool.map(work, fields))
        assert sequential == parallel


class TestFluidState:
    def test_mean_mismatch_rejected(self, grid16):
        n1 = RealField(grid16, np.full(grid16.shape, 0.1))
        n2 = RealField(grid16, np.full(grid16.shape, 0.2))
        u = RealField.zeros(grid16, rank=3)
        with pytest.raises(ChargeImbalanceError):
            FluidState(n1=n1, u1=u, n2=n2, u2=u)

    def test_vacuum_rejected(self, grid16):
        bad = np.full(grid16.shape, -1.5)
        u = RealField.zeros(grid16, rank=3)
        with pytest.raises(SpectralError):
            FluidState(n1=RealField(grid16, bad), u1=u,
                       n2=RealField(grid16, bad), u2=u)

    def test_symmetric_state_has_zero_field(self, grid16):
        X = np.broadcast_to(grid16.coordinates[0], grid16.shape)
        n = RealField(grid16, 1e-3 * np.cos(X))
        u = RealField.zeros(grid16, rank=3)
        st = FluidState(n1=n, u1=u, n2=n, u2=u)
        assert np.max(np.abs(st.potential_gradient().values)) < 1e-15

    def test_fields_immutable(self, grid16):
        f = RealField.zeros(grid16)
        with pytest.raises(ValueError):
            f.values[0, 0, 0] = 1.0
