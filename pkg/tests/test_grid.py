"""Spectral-calculus tests: frozen analytic oracles for every operator."""

import numpy as np
import pytest

from gqg.grid import ChannelGrid, DimensionMismatchError, apply_diff
from gqg.norms import boundary_sobolev_norm, sobolev_norm

from conftest import rel_max_err


class TestVerticalDiscretization:
    def test_nodes_include_boundaries_exactly(self, grid32):
        assert grid32.z[0] == 0.0
        assert grid32.z[-1] == grid32.h

    @pytest.mark.parametrize("nz", [4, 8, 16, 33])
    def test_ddz_exact_on_quadratic(self, nz):
        g = ChannelGrid(4, 4, nz)
        err = np.max(np.abs(g.Dz @ g.z**2 - 2 * g.z))
        assert err <= 1e-12

    def test_quadrature_exact_on_polynomials(self, grid32):
        # degree <= nz integrates exactly; h = 1 here
        for p in (0, 1, 2, 5, 10):
            assert abs(grid32.wz @ grid32.z**p - 1.0 / (p + 1)) < 1e-13

    def test_ddz_spectral_on_analytic(self, grid32):
        f = np.sin(np.pi * grid32.z)
        assert np.max(np.abs(grid32.Dz @ f - np.pi * np.cos(np.pi * grid32.z))) < 1e-10


class TestHorizontalOperators:
    def test_perp_of_unit_vector(self, grid32):
        x = np.zeros((2,) + grid32.shape)
        x[0] = 1.0
        perped = grid32.perp(x)
        assert np.all(perped[0] == 0.0)
        assert np.all(perped[1] == 1.0)

    def test_curl_of_gradient_vanishes(self, grid32, mesh32):
        xg, yg, _ = mesh32
        f = np.sin(2 * np.pi * xg) * np.cos(2 * np.pi * yg)
        assert np.max(np.abs(grid32.curl_h(grid32.grad_h(f)))) < 1e-11

    def test_perp_identities_on_random_fields(self, grid32):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2,) + grid32.shape)
        lhs = grid32.div_h(grid32.perp(x)) + grid32.curl_h(x)
        assert np.max(np.abs(lhs)) < 1e-10
        lhs = grid32.curl_h(grid32.perp(x)) - grid32.div_h(x)
        assert np.max(np.abs(lhs)) < 1e-10

    def test_derivative_oracle(self, grid32, mesh32):
        xg, _, _ = mesh32
        f = np.sin(2 * np.pi * xg)
        assert rel_max_err(grid32.ddx(f), 2 * np.pi * np.cos(2 * np.pi * xg)) < 1e-12

    def test_dd_both_matches_single_derivatives(self, grid32):
        rng = np.random.default_rng(1)
        f = rng.standard_normal(grid32.shape)
        fx, fy = grid32.dd_both(f)
        assert np.allclose(fx, grid32.ddx(f), atol=1e-12)
        assert np.allclose(fy, grid32.ddy(f), atol=1e-12)


class TestHorizontalMean:
    def test_zero_mean_mode(self, grid32, mesh32):
        xg, _, zg = mesh32
        f = np.sin(2 * np.pi * xg) * (1.0 + zg)
        assert np.max(np.abs(grid32.horizontal_mean(f))) < 1e-14

    def test_constant(self, grid32):
        f = np.full(grid32.shape, 3.0)
        assert np.allclose(grid32.horizontal_mean(f), 3.0)

    def test_mixed_profile(self, grid32, mesh32):
        _, yg, zg = mesh32
        f = 2.0 + np.cos(2 * np.pi * yg) * zg
        assert np.allclose(grid32.horizontal_mean(f), 2.0, atol=1e-14)

    def test_mean_of_gradients_vanishes(self, grid32):
        rng = np.random.default_rng(2)
        f = rng.standard_normal(grid32.shape)
        x = rng.standard_normal((2,) + grid32.shape)
        assert np.max(np.abs(grid32.horizontal_mean(grid32.grad_h(f)))) < 1e-13
        assert np.max(np.abs(grid32.horizontal_mean(grid32.curl_h(x)))) < 1e-13


class TestInverseLaplacians:
    def test_dirichlet_vertical_eigenfunction(self, grid32, mesh32):
        _, _, zg = mesh32
        rhs = np.sin(np.pi * zg / grid32.h)
        f = grid32.inv_laplace_dirichlet(rhs)
        expected = -((grid32.h / np.pi) ** 2) * rhs
        assert rel_max_err(f, expected) < 1e-12

    def test_dirichlet_zero(self, grid32):
        f = grid32.inv_laplace_dirichlet(np.zeros(grid32.shape))
        assert np.max(np.abs(f)) == 0.0

    def test_dirichlet_mixed_eigenfunction(self, grid32, mesh32):
        xg, _, zg = mesh32
        rhs = np.sin(2 * np.pi * xg) * np.sin(np.pi * zg / grid32.h)
        f = grid32.inv_laplace_dirichlet(rhs)
        lam = 4 * np.pi**2 + np.pi**2 / grid32.h**2
        assert rel_max_err(f, -rhs / lam) < 1e-11
        # verify independently by applying the forward operator
        assert rel_max_err(grid32.laplace3(f), rhs) < 1e-9

    def test_dirichlet_traces_exact(self, grid32):
        rng = np.random.default_rng(3)
        rhs = rng.standard_normal(grid32.shape)
        f = grid32.inv_laplace_dirichlet(rhs)
        assert np.max(np.abs(f[:, :, 0])) < 1e-13
        assert np.max(np.abs(f[:, :, -1])) < 1e-13

    def test_forward_inverse_identity_band_limited(self, grid32, mesh32):
        xg, yg, zg = mesh32
        rhs = (
            np.sin(2 * np.pi * xg) * np.sin(np.pi * zg)
            + np.cos(4 * np.pi * yg) * zg * (1 - zg)
        )
        f = grid32.inv_laplace_dirichlet(rhs)
        assert rel_max_err(grid32.laplace3(f), rhs) < 1e-9

    def test_inverse_forward_asymmetry(self, grid32, mesh32):
        # identity holds iff the field has zero traces
        _, _, zg = mesh32
        dirichlet_field = np.sin(np.pi * zg / grid32.h)
        roundtrip = grid32.inv_laplace_dirichlet(grid32.laplace3(dirichlet_field))
        assert rel_max_err(roundtrip, dirichlet_field) < 1e-9

        boundary_field = np.cos(np.pi * zg / grid32.h)  # traces +-1
        roundtrip = grid32.inv_laplace_dirichlet(grid32.laplace3(boundary_field))
        rel = np.max(np.abs(roundtrip - boundary_field)) / np.max(np.abs(boundary_field))
        assert rel >= 1e-2

    def test_horizontal_single_mode(self, grid32, mesh32):
        xg, yg, _ = mesh32
        f = np.sin(2 * np.pi * xg)
        assert rel_max_err(grid32.inv_laplace_h(f), -f / (4 * np.pi**2)) < 1e-12
        f2 = np.cos(2 * np.pi * xg) * np.cos(4 * np.pi * yg)
        assert rel_max_err(grid32.inv_laplace_h(f2), -f2 / (4 * np.pi**2 + 16 * np.pi**2)) < 1e-12
        assert rel_max_err(grid32.laplace_h(grid32.inv_laplace_h(f2)), f2) < 1e-11

    def test_horizontal_zero_mean_convention(self, grid32):
        ones = np.ones(grid32.shape)
        assert np.max(np.abs(grid32.inv_laplace_h(ones))) == 0.0
        rng = np.random.default_rng(4)
        a = rng.standard_normal(grid32.shape)
        lhs = grid32.inv_laplace_h(grid32.laplace_h(a))
        expected = a - grid32.horizontal_mean(a)[None, None, :]
        assert np.max(np.abs(lhs - expected)) < 1e-9


class TestHelmholtz1D:
    def test_zero_everything(self, grid32):
        f = grid32.helmholtz_solve_1d(0.0, np.zeros(grid32.nz + 1), ("dirichlet", 0.0, 0.0))
        assert np.max(np.abs(f)) == 0.0

    def test_exponential_homogeneous(self, grid32):
        # (d_zz - 1) f = 0 with f(0) = 1, f(h) = e^{-h}  ->  f = e^{-z}
        f = grid32.helmholtz_solve_1d(
            1.0, np.zeros(grid32.nz + 1), ("dirichlet", 1.0, np.exp(-grid32.h))
        )
        assert np.max(np.abs(f.real - np.exp(-grid32.z))) < 1e-12

    def test_neumann_singular_mode(self, grid32):
        # f'' = 1 with f'(0) = 0, f'(h) = h  ->  f = z^2/2 - h^2/6 (zero mean)
        h = grid32.h
        f = grid32.helmholtz_solve_1d(
            0.0, np.ones(grid32.nz + 1), ("neumann", 0.0, h)
        )
        assert np.max(np.abs(f.real - (grid32.z**2 / 2 - h**2 / 6))) < 1e-11
        assert abs(grid32.wz @ f.real) < 1e-12

    def test_neumann_defect_projected_and_warned(self, grid32):
        rhs = np.ones(grid32.nz + 1)
        with pytest.warns(RuntimeWarning, match="solvability defect"):
            grid32.helmholtz_solve_1d(0.0, rhs, ("neumann", 0.0, 0.0))
        assert grid32.last_neumann_defect == pytest.approx(grid32.h)

    def test_residual_below_tolerance_random(self, grid32):
        rng = np.random.default_rng(5)
        rhs = rng.standard_normal(grid32.nz + 1)
        for k2 in (0.0, 1.0, 4 * np.pi**2 * 25):
            f = grid32.helmholtz_solve_1d(k2, rhs, ("dirichlet", 0.3, -0.7))
            resid = grid32.Dz2 @ f - k2 * f - rhs
            rel = np.max(np.abs(resid[1:-1])) / np.max(np.abs(rhs))
            assert rel < 1e-10
            assert abs(f[0] - 0.3) < 1e-12 and abs(f[-1] + 0.7) < 1e-12

    def test_nonfinite_rejected(self, grid32):
        rhs = np.full(grid32.nz + 1, np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            grid32.helmholtz_solve_1d(0.0, rhs, ("dirichlet", 0.0, 0.0))


class TestExtendBoundary:
    def test_zero_data(self, grid32):
        z = np.zeros((grid32.nx, grid32.ny))
        assert np.max(np.abs(grid32.extend_boundary(z, z))) == 0.0

    def test_constant_data(self, grid32):
        ones = np.ones((grid32.nx, grid32.ny))
        assert np.max(np.abs(grid32.extend_boundary(ones, ones) - 1.0)) < 1e-14

    def test_traces_exact(self, grid32):
        rng = np.random.default_rng(6)
        bot = grid32.dealias_modes(rng.standard_normal((grid32.nx, grid32.ny)))
        top = grid32.dealias_modes(rng.standard_normal((grid32.nx, grid32.ny)))
        lift = grid32.extend_boundary(bot, top)
        assert np.max(np.abs(lift[:, :, 0] - bot)) < 1e-13
        assert np.max(np.abs(lift[:, :, -1] - top)) < 1e-13

    def test_linearity(self, grid32):
        rng = np.random.default_rng(7)
        shape = (grid32.nx, grid32.ny)
        a1, a2, b1, b2 = (rng.standard_normal(shape) for _ in range(4))
        lhs = grid32.extend_boundary(a1 + a2, b1 + b2)
        rhs = grid32.extend_boundary(a1, b1) + grid32.extend_boundary(a2, b2)
        assert np.max(np.abs(lhs - rhs)) < 1e-12
        assert np.max(np.abs(grid32.extend_boundary(2.5 * a1, 2.5 * b1)
                             - 2.5 * grid32.extend_boundary(a1, b1))) < 1e-12

    def test_norm_ratio_bounded(self, grid32):
        # H^1(channel) norm of the lift against the H^{1/2}(T^2) norm of the
        # data: the ratio over random band-limited samples stays in a narrow
        # band (the fitted constant is stable)
        rng = np.random.default_rng(8)
        ratios = []
        for _ in range(10):
            bot = grid32.dealias_modes(rng.standard_normal((grid32.nx, grid32.ny)))
            top = grid32.dealias_modes(rng.standard_normal((grid32.nx, grid32.ny)))
            lift = grid32.extend_boundary(bot, top)
            num = sobolev_norm(grid32, lift, 1)
            den = boundary_sobolev_norm(grid32, [bot, top], 0.5)
            ratios.append(num / den)
        assert max(ratios) / min(ratios) < 10.0


class TestDealias:
    def test_band_limited_unchanged(self, grid32, mesh32):
        xg, _, _ = mesh32
        f = np.sin(2 * np.pi * 8 * xg)  # |k| = 8 = nx/4 < nx/3
        assert np.max(np.abs(grid32.dealias_modes(f) - f)) < 1e-12

    def test_high_modes_zeroed(self, grid32, mesh32):
        xg, _, _ = mesh32
        f = np.sin(2 * np.pi * 12 * xg)  # |k| = 12 > 32/3
        assert np.max(np.abs(grid32.dealias_modes(f))) < 1e-12

    def test_idempotent(self, grid32):
        rng = np.random.default_rng(9)
        f = rng.standard_normal(grid32.shape)
        once = grid32.dealias_modes(f)
        twice = grid32.dealias_modes(once)
        assert np.max(np.abs(twice - once)) < 1e-13


class TestApplyDiffDispatch:
    def test_kinds_match_methods(self, grid32):
        rng = np.random.default_rng(10)
        f = rng.standard_normal(grid32.shape)
        x = rng.standard_normal((2,) + grid32.shape)
        assert np.array_equal(apply_diff(grid32, "ddx", f), grid32.ddx(f))
        assert np.array_equal(apply_diff(grid32, "curl_h", x), grid32.curl_h(x))
        assert np.array_equal(apply_diff(grid32, "perp", x), grid32.perp(x))
        assert np.array_equal(apply_diff(grid32, "laplace3", f), grid32.laplace3(f))

    def test_arity_mismatch_reports_operand(self, grid32):
        f = np.zeros(grid32.shape)
        with pytest.raises(DimensionMismatchError, match="perp operand"):
            apply_diff(grid32, "perp", f)
        with pytest.raises(ValueError, match="unknown operator"):
            apply_diff(grid32, "nope", f)

    def test_bad_grid_parameters_rejected(self):
        with pytest.raises(ValueError):
            ChannelGrid(31, 32, 16)
        with pytest.raises(ValueError):
            ChannelGrid(32, 32, 16, h=-1.0)
        with pytest.raises(ValueError):
            ChannelGrid(32, 32, 1)
