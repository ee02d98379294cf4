"""Norms, the energy functional, validators, and the diagnostics record."""

import numpy as np
import pytest

from gqg.norms import (
    boundary_sobolev_norm,
    energy_functional,
    norm_l2,
    profile_sobolev_norm,
    sobolev_norm,
)
from gqg.states import DIAGNOSTICS_HEADER, DiagnosticsRecord, PrimitiveState, validate_gpv, validate_primitive
from gqg.transform import extract_gpv

from conftest import random_primitive


def _zero_state(grid, eps=0.1):
    return PrimitiveState(grid, np.zeros((2,) + grid.shape), np.zeros(grid.shape),
                          np.zeros(grid.shape), eps=eps)


class TestSobolevNorm:
    def test_constant_field_measures_domain(self, grid32):
        f = np.ones(grid32.shape)
        assert sobolev_norm(grid32, f, 0) == pytest.approx(np.sqrt(grid32.h), rel=1e-13)

    def test_single_mode_h1(self, grid32, mesh32):
        xg, _, _ = mesh32
        f = np.sin(2 * np.pi * xg)
        expected = np.sqrt((0.5 + (2 * np.pi) ** 2 / 2) * grid32.h)
        assert sobolev_norm(grid32, f, 1) == pytest.approx(expected, rel=1e-12)

    def test_zero_field(self, grid32):
        assert sobolev_norm(grid32, np.zeros(grid32.shape), 3) == 0.0

    def test_monotone_in_order(self, grid32):
        rng = np.random.default_rng(0)
        f = grid32.dealias_modes(rng.standard_normal(grid32.shape))
        norms = [sobolev_norm(grid32, f, s) for s in range(4)]
        assert norms == sorted(norms)

    def test_vector_field_sums_components(self, grid32):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2,) + grid32.shape)
        combined = sobolev_norm(grid32, x, 1)
        parts = np.hypot(sobolev_norm(grid32, x[0], 1), sobolev_norm(grid32, x[1], 1))
        assert combined == pytest.approx(parts, rel=1e-12)

    def test_invalid_order(self, grid32):
        with pytest.raises(ValueError):
            sobolev_norm(grid32, np.zeros(grid32.shape), 4)

    def test_profile_norm_oracle(self, grid32):
        # ||sin(pi z)||_{H^1(0,1)}^2 = 1/2 + pi^2/2
        prof = np.sin(np.pi * grid32.z)
        expected = np.sqrt(0.5 + np.pi**2 / 2)
        assert profile_sobolev_norm(grid32, prof, 1) == pytest.approx(expected, rel=1e-10)

    def test_boundary_norm_fractional(self, grid32):
        ones = np.ones((grid32.nx, grid32.ny))
        assert boundary_sobolev_norm(grid32, ones, 0.5) == pytest.approx(1.0, rel=1e-13)
        xg, _ = np.meshgrid(grid32.x, grid32.y, indexing="ij")
        f = np.cos(2 * np.pi * xg)
        expected = np.sqrt(0.5 * (1 + 4 * np.pi**2) ** 0.5)
        assert boundary_sobolev_norm(grid32, f, 0.5) == pytest.approx(expected, rel=1e-12)


class TestEnergyFunctional:
    def test_zero_state(self, grid32):
        assert energy_functional(_zero_state(grid32)) == 0.0

    def test_single_mode_oracle(self, grid32, mesh32):
        # v = (sin(2 pi y), 0), w = theta = 0: pv = -2 pi cos(2 pi y),
        # imbalance = 0; analytic mode integrals, summed independently
        _, yg, _ = mesh32
        state = _zero_state(grid32)
        state.v[0] = np.sin(2 * np.pi * yg)
        k2 = (2 * np.pi) ** 2
        pv_h2 = k2 * 0.5 * (1 + k2 + k2**2)  # ay = 0, 1, 2 derivatives of the cosine
        tower = 0.5 * (1 + k2 + k2**2 + k2**3)
        expected = pv_h2 + tower
        assert energy_functional(state) == pytest.approx(expected, rel=1e-11)

    def test_quadratic_scaling(self, grid32):
        state = random_primitive(grid32, seed=2)
        e1 = energy_functional(state)
        e4 = energy_functional(state.scaled(2.0))
        assert e4 == pytest.approx(4.0 * e1, rel=1e-12)

    def test_equivalence_with_h3_norm(self, grid32):
        # calibrated once: the ratio E / ||.||_{H^3}^2 over random band-limited
        # states stays inside a fixed interval
        ratios = []
        for seed in range(50):
            state = random_primitive(grid32, seed=seed)
            h3 = sobolev_norm(grid32, [state.v, state.w, state.theta], 3)
            ratios.append(energy_functional(state) / h3**2)
        assert 1.0 / 64.0 < min(ratios) and max(ratios) < 64.0
        assert max(ratios) / min(ratios) < 16.0


class TestValidators:
    def test_manufactured_solenoidal_passes(self, grid32, mesh32):
        xg, _, zg = mesh32
        state = _zero_state(grid32)
        # w = sin(2 pi x) sin(pi z), v1 chosen so that d_x v1 = -d_z w
        state.w[:] = np.sin(2 * np.pi * xg) * np.sin(np.pi * zg)
        state.v[0] = (np.pi / (2 * np.pi)) * np.cos(2 * np.pi * xg) * np.cos(np.pi * zg)
        rep = validate_primitive(state, tol=1e-10)
        assert rep.passed, rep.residuals

    def test_boundary_violation_reported(self, grid32, mesh32):
        _, _, zg = mesh32
        state = _zero_state(grid32)
        state.w[:] = zg  # w(h) = h
        rep = validate_primitive(state, tol=1e-8)
        assert not rep.passed
        assert rep["bc"] == pytest.approx(grid32.h)

    def test_zero_state_passes(self, grid32):
        rep = validate_primitive(_zero_state(grid32), tol=0.0)
        assert rep.passed and rep["div"] == 0.0 and rep["bc"] == 0.0

    def test_gpv_of_valid_state_passes(self, grid32):
        state = random_primitive(grid32, seed=3)
        rep = validate_gpv(extract_gpv(state), tol=1e-10)
        assert rep.passed, rep.residuals

    def test_gpv_mean_constraint_violation(self, grid32):
        state = random_primitive(grid32, seed=4)
        gpv = extract_gpv(state)
        gpv.imbalance[0] += 1.0  # constant imbalance, vmean unchanged
        rep = validate_gpv(gpv, tol=1e-8)
        assert not rep.passed
        assert rep["mean"] > 0.5

    def test_zero_gpv_passes(self, grid32):
        state = _zero_state(grid32)
        rep = validate_gpv(extract_gpv(state), tol=0.0)
        assert rep.passed


class TestDiagnosticsRecord:
    def test_header_fixed(self):
        assert DIAGNOSTICS_HEADER == (
            "t,E_frak,l2_energy,h3_norm,div_residual,bc_residual,"
            "mean_residual,compat_residual"
        )

    def test_csv_round_trip_exact(self):
        rec = DiagnosticsRecord(
            t=0.1 + 1e-17, E_frak=np.pi, l2_energy=1.0 / 3.0, h3_norm=2.0**-52,
            div_residual=1e-300, bc_residual=0.0, mean_residual=7.0, compat_residual=-0.0,
        )
        back = DiagnosticsRecord.from_csv_row(rec.csv_row())
        for key in vars(rec):
            assert getattr(back, key) == getattr(rec, key)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            DiagnosticsRecord(0, np.nan, 0, 0, 0, 0, 0, 0)
        with pytest.raises(ValueError):
            DiagnosticsRecord(0, -1.0, 0, 0, 0, 0, 0, 0)
