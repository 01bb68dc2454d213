import math

import numpy as np
import pytest

from traitspectra.bases import (
    KernelBasisSpec,
    WavelengthGrid,
    build_bases,
    default_bases,
    gaussian_kernel_matrix,
    kernel_column_names,
    linear_spline_matrix,
    spline_column_names,
    write_basis_csv,
)


@pytest.fixture(scope="module")
def grid():
    return WavelengthGrid.default()


@pytest.fixture(scope="module")
def bases(grid):
    return default_bases(grid)


class TestWavelengthGrid:
    def test_default_has_500_points(self, grid):
        assert grid.n_points == 500
        assert grid.start == 450.0
        assert grid.stop == 949.0

    def test_rejects_nonincreasing(self):
        with pytest.raises(ValueError):
            WavelengthGrid(np.array([450.0, 450.0, 451.0]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            WavelengthGrid(np.array([]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            WavelengthGrid(np.array([450.0, np.nan]))


class TestGaussianKernelMatrix:
    def test_value_one_at_knot(self, grid):
        spec = KernelBasisSpec(450.0, 950.0, 10.0)
        K = gaussian_kernel_matrix(grid, spec)
        # grid point 460 coincides with the second knot (column 2 after intercept)
        i = np.where(grid.values == 460.0)[0][0]
        assert K[i, 2] == 1.0

    def test_value_at_one_bandwidth(self):
        # |w - knot| = h forces exp(-1/2) for this kernel form
        spec = KernelBasisSpec(450.0, 450.0, 10.0, bandwidth=15.0)
        g = WavelengthGrid(np.array([465.0]))
        K = gaussian_kernel_matrix(g, spec)
        assert math.isclose(K[0, 1], math.exp(-0.5), rel_tol=1e-12)
        assert math.isclose(K[0, 1], 0.606531, rel_tol=1e-6)

    def test_default_alpha_spec_column_count(self, grid):
        spec = KernelBasisSpec(450.0, 950.0, 10.0)
        assert gaussian_kernel_matrix(grid, spec).shape == (500, 52)

    def test_bandwidth_defaults_to_1p5_spacing(self):
        spec = KernelBasisSpec(450.0, 950.0, 25.0)
        assert spec.bandwidth == 37.5

    def test_nonpositive_bandwidth_rejected(self, grid):
        with pytest.raises(ValueError):
            KernelBasisSpec(450.0, 950.0, 10.0, bandwidth=0.0)

    def test_entries_in_unit_interval(self, grid):
        K = gaussian_kernel_matrix(grid, KernelBasisSpec(450.0, 950.0, 25.0))
        assert np.all(K >= 0.0)
        assert np.all(K <= 1.0)

    def test_shift_equivariance(self):
        # translating grid and knots together leaves the matrix unchanged
        delta = 128.0
        g0 = WavelengthGrid(np.arange(450.0, 550.0))
        g1 = WavelengthGrid(g0.values + delta)
        s0 = KernelBasisSpec(450.0, 550.0, 25.0)
        s1 = KernelBasisSpec(450.0 + delta, 550.0 + delta, 25.0)
        np.testing.assert_array_equal(
            gaussian_kernel_matrix(g0, s0), gaussian_kernel_matrix(g1, s1)
        )


class TestLinearSplineMatrix:
    def test_default_spec_has_12_columns(self, grid):
        knots = np.arange(475.0, 949.0, 50.0)
        assert knots.size == 10
        K = linear_spline_matrix(grid, knots)
        assert K.shape == (500, 12)

    def test_hinges_vanish_left_of_knots(self, grid):
        K = linear_spline_matrix(grid, np.arange(475.0, 949.0, 50.0))
        assert np.all(K[0, 2:] == 0.0)  # w = 450 sits left of every knot

    def test_piecewise_linear_between_knots(self, grid):
        # second differences vanish away from the knots
        knots = np.arange(475.0, 949.0, 50.0)
        K = linear_spline_matrix(grid, knots)
        w = grid.values
        d2 = K[2:] - 2.0 * K[1:-1] + K[:-2]
        interior = np.array([not np.any(np.abs(knots - wi) < 1.0) for wi in w[1:-1]])
        assert np.max(np.abs(d2[interior])) < 1e-10

    def test_rejects_outside_grid(self, grid):
        with pytest.raises(ValueError):
            linear_spline_matrix(grid, np.array([300.0, 475.0]))

    def test_rejects_unsorted(self, grid):
        with pytest.raises(ValueError):
            linear_spline_matrix(grid, np.array([525.0, 475.0]))


class TestDefaultBases:
    def test_published_column_counts(self, bases):
        assert (bases.n_alpha, bases.n_u, bases.n_beta, bases.n_sigma) == (52, 22, 7, 12)

    def test_u_basis_is_21_knots_plus_intercept(self, bases):
        assert bases.u_spec.knots.size == 21
        assert bases.n_u == 22

    def test_all_matrices_have_500_rows(self, bases):
        for K in (bases.K_alpha, bases.K_U, bases.K_beta, bases.K_sigma):
            assert K.shape[0] == 500

    def test_intercept_columns_are_ones(self, bases):
        for K in (bases.K_alpha, bases.K_U, bases.K_beta, bases.K_sigma):
            np.testing.assert_array_equal(K[:, 0], np.ones(500))

    def test_entries_finite_and_kernels_bounded(self, bases):
        for K in (bases.K_alpha, bases.K_U, bases.K_beta, bases.K_sigma):
            assert np.all(np.isfinite(K))
        for K in (bases.K_alpha, bases.K_U, bases.K_beta):
            assert np.all((K >= 0.0) & (K <= 1.0))

    def test_kernel_columns_peak_nearest_knot(self, grid, bases):
        for K, spec in (
            (bases.K_alpha, bases.alpha_spec),
            (bases.K_U, bases.u_spec),
            (bases.K_beta, bases.beta_spec),
        ):
            for j, knot in enumerate(spec.knots):
                col = K[:, j + 1]
                nearest = np.argmin(np.abs(grid.values - knot))
                assert np.argmax(col) == nearest

    def test_warns_when_grid_does_not_cover_default_range(self):
        with pytest.warns(UserWarning):
            default_bases(WavelengthGrid(np.arange(500.0, 700.0)))

    def test_alpha_basis_reconstructs_smooth_target(self, grid, bases):
        # richness smoke test: least squares on K_alpha captures a sine
        w = grid.values
        target = np.sin(2.0 * np.pi * (w - 450.0) / 499.0)
        coef, *_ = np.linalg.lstsq(bases.K_alpha, target, rcond=None)
        fit = bases.K_alpha @ coef
        rel_err = np.linalg.norm(fit - target) / np.linalg.norm(target)
        assert rel_err < 1e-2

    def test_reduced_knot_layout(self):
        g = WavelengthGrid(np.arange(450.0, 950.0, 10.0))
        b = build_bases(g, alpha_spacing=50.0, u_spacing=100.0, beta_spacing=250.0, sigma_spacing=100.0)
        assert g.n_points == 50
        assert b.K_alpha.shape == (50, 12)
        assert b.K_U.shape == (50, 7)
        assert b.K_beta.shape == (50, 4)
        assert b.K_sigma.shape == (50, 7)


class TestExport:
    def test_headers(self, bases):
        names = kernel_column_names(bases.alpha_spec)
        assert names[:3] == ["intercept", "k450", "k460"]
        assert len(names) == 52
        snames = spline_column_names(bases.sigma_knots)
        assert snames[:3] == ["intercept", "linear", "h475"]
        assert len(snames) == 12

    def test_round_trip(self, tmp_path, grid, bases):
        path = tmp_path / "k_beta.csv"
        names = kernel_column_names(bases.beta_spec)
        write_basis_csv(path, grid, bases.K_beta, names)
        raw = np.genfromtxt(path, delimiter=",", skip_header=1)
        np.testing.assert_array_equal(raw[:, 0], grid.values)
        np.testing.assert_array_equal(raw[:, 1:], bases.K_beta)

    def test_shape_mismatch_rejected(self, tmp_path, grid, bases):
        with pytest.raises(ValueError):
            write_basis_csv(tmp_path / "x.csv", grid, bases.K_beta, ["intercept"])
