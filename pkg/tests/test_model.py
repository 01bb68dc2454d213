import numpy as np
import pytest
from scipy import stats

from traitspectra.model import (
    Dataset,
    Parameters,
    PriorConfig,
    coefficient_functions,
    induced_sigma,
    log_joint_density,
    params_from_rows,
    params_to_rows,
    reflectance_fixed_effects,
    simulate_dataset,
    standardize_covariates,
    trait_reflectance_correlation,
    trait_residuals,
    wavelength_variance,
)

from conftest import intercept_bases, random_params, toy_bases


class TestStandardize:
    def test_simple_column(self):
        E, t = standardize_covariates(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(E[:, 0], [-1.0, 0.0, 1.0])
        assert t.means[0] == 2.0 and t.scales[0] == 1.0

    def test_idempotent(self, rng):
        E = rng.standard_normal((40, 3))
        E1, _ = standardize_covariates(E)
        E2, _ = standardize_covariates(E1)
        np.testing.assert_allclose(E1, E2, atol=1e-12)

    def test_stored_transform_round_trip(self, rng):
        E = 3.0 + 2.0 * rng.standard_normal((25, 4))
        E1, t = standardize_covariates(E)
        E2, _ = standardize_covariates(E, transform=t)
        np.testing.assert_array_equal(E1, E2)

    def test_constant_column_rejected(self):
        with pytest.raises(ValueError):
            standardize_covariates(np.ones((10, 2)))


class TestWavelengthVariance:
    def test_zero_gamma_gives_unit_variance(self):
        b = toy_bases(12)
        v = wavelength_variance(np.zeros(b.n_sigma), b.K_sigma)
        np.testing.assert_array_equal(v, np.ones(12))

    def test_intercept_only_scales(self):
        b = toy_bases(12)
        g = np.zeros(b.n_sigma)
        g[0] = np.log(4.0)
        np.testing.assert_allclose(wavelength_variance(g, b.K_sigma), 4.0)

    def test_matches_scalar_loop(self, rng):
        b = toy_bases(17)
        g = rng.standard_normal(b.n_sigma)
        v = wavelength_variance(g, b.K_sigma)
        expected = np.array(
            [np.exp(sum(b.K_sigma[w, j] * g[j] for j in range(b.n_sigma))) for w in range(17)]
        )
        np.testing.assert_allclose(v, expected, rtol=1e-12)

    def test_overflow_guard(self):
        b = intercept_bases(3)
        with pytest.raises(OverflowError):
            wavelength_variance(np.array([800.0]), b.K_sigma)


class TestCoefficientFunctions:
    def test_zero_matrix(self):
        b = toy_bases(10)
        curves = coefficient_functions(np.zeros((3, b.n_beta)), b.K_beta)
        np.testing.assert_array_equal(curves, np.zeros((3, 10)))

    def test_intercept_only_gives_constant_curves(self):
        b = toy_bases(10)
        B = np.zeros((2, b.n_beta))
        B[:, 0] = [1.5, -2.0]
        curves = coefficient_functions(B, b.K_beta)
        np.testing.assert_allclose(curves[0], 1.5)
        np.testing.assert_allclose(curves[1], -2.0)

    def test_matches_loop_oracle(self, rng):
        b = toy_bases(14)
        B = rng.standard_normal((3, b.n_beta))
        curves = coefficient_functions(B, b.K_beta)
        for k in range(3):
            for w in range(14):
                expected = sum(B[k, j] * b.K_beta[w, j] for j in range(b.n_beta))
                assert abs(curves[k, w] - expected) < 1e-12

    def test_dimension_mismatch(self):
        b = toy_bases(10)
        with pytest.raises(ValueError):
            coefficient_functions(np.zeros((2, b.n_beta + 1)), b.K_beta)


class TestInducedSigma:
    def test_zero_cross_block(self, rng):
        b = toy_bases(15)
        params = random_params(rng, b)
        s = params.s
        params.Omega[:s, s:] = 0.0
        params.Omega[s:, :s] = 0.0
        cov = induced_sigma(params, b)
        np.testing.assert_array_equal(cov.cross_block, np.zeros((s, 15)))

    def test_rank_one_reflectance_block(self, rng):
        b = intercept_bases(6)
        v = 2.5
        params = Parameters(
            alpha_T=np.zeros(1),
            B_T=np.zeros((1, 1)),
            alpha_star_R=np.zeros(1),
            B_R=np.zeros((1, 1)),
            gamma_sigma=np.array([np.log(0.7)]),
            Omega=np.array([[1.0, 0.0], [0.0, v]]),
            sigma2_alpha=1.0,
            sigma2_beta=np.ones(1),
        )
        cov = induced_sigma(params, b)
        expected = v * np.ones((6, 6)) + 0.7 * np.eye(6)
        np.testing.assert_allclose(cov.reflectance_block, expected, rtol=1e-12)

    def test_trait_block_is_exact(self, rng):
        b = toy_bases(12)
        params = random_params(rng, b, s=3, p=2)
        cov = induced_sigma(params, b)
        np.testing.assert_array_equal(cov.trait_block, params.Omega[:3, :3])

    def test_symmetric_and_choleskyable_with_jitter(self, rng):
        b = toy_bases(25)
        for _ in range(5):
            params = random_params(rng, b)
            cov = induced_sigma(params, b)
            np.testing.assert_array_equal(cov.Sigma, cov.Sigma.T)
            np.linalg.cholesky(cov.Sigma + 1e-10 * np.eye(cov.Sigma.shape[0]))

    def test_non_spd_rejected(self, rng):
        b = toy_bases(10)
        params = random_params(rng, b)
        params.Omega = params.Omega - 10.0 * np.eye(params.Omega.shape[0])
        with pytest.raises(ValueError):
            induced_sigma(params, b)

    def test_forward_simulation_covariance(self, rng):
        # empirical covariance of simulated (T, R at probe wavelengths)
        # matches the assembled matrix within Monte Carlo error
        b = toy_bases(10)
        params = random_params(rng, b, s=2, p=2)
        n = 20000
        data = simulate_dataset(params, np.zeros((n, 2)), b, seed=7)
        probes = [0, 4, 9]
        X = np.hstack([data.T, data.R[:, probes]])
        emp = np.cov(X, rowvar=False)
        idx = [0, 1] + [2 + w for w in probes]
        theo = induced_sigma(params, b).Sigma[np.ix_(idx, idx)]
        se = np.sqrt((np.outer(np.diag(theo), np.diag(theo)) + theo**2) / n)
        assert np.all(np.abs(emp - theo) < 4.0 * se)


class TestCorrelation:
    def test_zero_cross_gives_zero_curves(self, rng):
        b = toy_bases(15)
        params = random_params(rng, b)
        s = params.s
        params.Omega[:s, s:] = 0.0
        params.Omega[s:, :s] = 0.0
        corr = trait_reflectance_correlation(params, b)
        np.testing.assert_array_equal(corr, np.zeros((s, 15)))

    def test_two_by_two_recovers_rho(self):
        rho = 0.67
        b = intercept_bases(4)
        params = Parameters(
            alpha_T=np.zeros(1),
            B_T=np.zeros((1, 1)),
            alpha_star_R=np.zeros(1),
            B_R=np.zeros((1, 1)),
            gamma_sigma=np.array([np.log(1e-12)]),
            Omega=np.array([[1.0, rho], [rho, 1.0]]),
            sigma2_alpha=1.0,
            sigma2_beta=np.ones(1),
        )
        corr = trait_reflectance_correlation(params, b)
        np.testing.assert_allclose(corr, rho, rtol=1e-9)

    def test_consistent_with_induced_sigma(self, rng):
        b = toy_bases(18)
        params = random_params(rng, b, s=3, p=2)
        corr = trait_reflectance_correlation(params, b)
        Sigma = induced_sigma(params, b).Sigma
        sd = np.sqrt(np.diag(Sigma))
        full_corr = Sigma / np.outer(sd, sd)
        np.testing.assert_allclose(corr, full_corr[:3, 3:], rtol=1e-10)

    def test_entries_within_unit_interval(self, rng):
        b = toy_bases(30)
        for _ in range(5):
            params = random_params(rng, b)
            corr = trait_reflectance_correlation(params, b)
            assert np.all(np.abs(corr) <= 1.0 + 1e-12)


class TestSimulate:
    def test_degenerate_noise_recovers_fixed_effects(self, rng):
        eps = 1e-12
        b = intercept_bases(8)
        params = Parameters(
            alpha_T=np.array([0.4]),
            B_T=np.array([[1.2]]),
            alpha_star_R=np.array([-0.3]),
            B_R=np.array([[0.8]]),
            gamma_sigma=np.array([np.log(eps)]),
            Omega=eps * np.eye(2),
            sigma2_alpha=1.0,
            sigma2_beta=np.ones(1),
        )
        E = rng.standard_normal((5, 1))
        data = simulate_dataset(params, E, b, seed=11)
        T_mean = params.alpha_T + E @ params.B_T.T
        R_mean = reflectance_fixed_effects(params, b, E)
        assert np.max(np.abs(data.T - T_mean)) < 10.0 * np.sqrt(eps)
        assert np.max(np.abs(data.R - R_mean)) < 10.0 * np.sqrt(eps)

    def test_seed_determinism(self, rng):
        b = toy_bases(12)
        params = random_params(rng, b)
        E = rng.standard_normal((7, 2))
        d1 = simulate_dataset(params, E, b, seed=99)
        d2 = simulate_dataset(params, E, b, seed=99)
        np.testing.assert_array_equal(d1.T, d2.T)
        np.testing.assert_array_equal(d1.R, d2.R)

    def test_residual_identity_recovers_latent_trait_block(self, rng):
        # regenerate the latent draw and check the residual identity exactly
        b = toy_bases(12)
        params = random_params(rng, b, s=2, p=2)
        E = rng.standard_normal((9, 2))
        data = simulate_dataset(params, E, b, seed=5)
        gen = np.random.default_rng(5)
        L = np.linalg.cholesky(params.Omega)
        U = gen.standard_normal((9, params.Omega.shape[0])) @ L.T
        np.testing.assert_allclose(
            trait_residuals(params, E, data.T), U[:, :2], atol=1e-12
        )

    def test_non_spd_omega_rejected(self, rng):
        b = toy_bases(10)
        params = random_params(rng, b)
        params.Omega = -np.eye(params.Omega.shape[0])
        with pytest.raises(ValueError):
            simulate_dataset(params, np.zeros((3, 2)), b, seed=0)


def _empty_dataset(bases, s, p):
    return Dataset(
        E=np.zeros((0, p)),
        T=np.zeros((0, s)),
        R=np.zeros((0, bases.grid.n_points)),
        grid=bases.grid,
        site_ids=np.array([], dtype=str),
    )


def _prior_only_oracle(params, priors, s):
    """Sum of prior log densities computed with scipy building blocks."""
    total = stats.norm.logpdf(
        params.alpha_star_R[0], scale=np.sqrt(priors.var_alpha_star_intercept)
    )
    total += np.sum(
        stats.norm.logpdf(params.alpha_star_R[1:], scale=np.sqrt(params.sigma2_alpha))
    )
    total += np.sum(stats.norm.logpdf(params.B_R[:, 0], scale=np.sqrt(priors.var_b_r_intercept)))
    for k in range(params.B_R.shape[0]):
        total += np.sum(
            stats.norm.logpdf(params.B_R[k, 1:], scale=np.sqrt(params.sigma2_beta[k]))
        )
    total += np.sum(stats.norm.logpdf(params.alpha_T, scale=np.sqrt(priors.var_alpha_t)))
    total += np.sum(stats.norm.logpdf(params.B_T, scale=np.sqrt(priors.var_b_t)))
    total += stats.norm.logpdf(params.gamma_sigma[0], scale=np.sqrt(priors.var_gamma_intercept))
    total += np.sum(stats.norm.logpdf(params.gamma_sigma[1:], scale=np.sqrt(priors.var_gamma)))
    d = params.Omega.shape[0]
    df = (d - s) + s + priors.wishart_df_offset
    total += stats.wishart.logpdf(
        np.linalg.inv(params.Omega), df=df, scale=np.eye(d) / priors.wishart_rate
    )
    total += stats.gamma.logpdf(1.0 / params.sigma2_alpha, a=1.0, scale=1.0)
    total += np.sum(stats.gamma.logpdf(1.0 / params.sigma2_beta, a=1.0, scale=1.0))
    return float(total)


class TestLogJointDensity:
    def test_prior_only_matches_independent_sum(self, rng):
        b = toy_bases(10)
        params = random_params(rng, b, s=2, p=3, n=0)
        priors = PriorConfig()
        data = _empty_dataset(b, s=2, p=3)
        got = log_joint_density(params, data, b, priors)
        assert np.isclose(got, _prior_only_oracle(params, priors, s=2), rtol=1e-10)

    def test_scalar_toy_matches_hand_computation(self, rng):
        b = intercept_bases(1)
        params = Parameters(
            alpha_T=np.array([0.2]),
            B_T=np.array([[0.5]]),
            alpha_star_R=np.array([0.1]),
            B_R=np.array([[-0.4]]),
            gamma_sigma=np.array([0.3]),
            Omega=np.array([[1.3, 0.4], [0.4, 0.9]]),
            sigma2_alpha=1.1,
            sigma2_beta=np.array([0.8]),
            U=np.array([[0.0, 0.25]]),
        )
        E = np.array([[0.7]])
        T = np.array([[1.1]])
        R = np.array([[0.6]])
        data = Dataset(E=E, T=T, R=R, grid=b.grid, site_ids=np.array(["a"]))
        u_t = T[0, 0] - params.alpha_T[0] - params.B_T[0, 0] * E[0, 0]
        latent = stats.multivariate_normal.logpdf([u_t, 0.25], mean=[0, 0], cov=params.Omega)
        resid = R[0, 0] - params.alpha_star_R[0] - params.B_R[0, 0] * E[0, 0] - 0.25
        noise = stats.norm.logpdf(resid, scale=np.sqrt(np.exp(0.3)))
        expected = latent + noise + _prior_only_oracle(params, PriorConfig(), s=1)
        got = log_joint_density(params, data, b)
        assert np.isclose(got, expected, rtol=1e-10)

    def test_invariant_to_replicate_ordering(self, rng):
        b = toy_bases(14)
        params = random_params(rng, b, s=2, p=2, n=8)
        E = rng.standard_normal((8, 2))
        data = simulate_dataset(params, E, b, seed=3)
        base = log_joint_density(params, data, b)
        perm = rng.permutation(8)
        params_p = params.copy()
        params_p.U = params.U[perm]
        shuffled = Dataset(
            E=data.E[perm], T=data.T[perm], R=data.R[perm], grid=b.grid,
            site_ids=data.site_ids[perm],
        )
        assert np.isclose(log_joint_density(params_p, shuffled, b), base, rtol=1e-12)

    def test_invalid_states_give_minus_inf(self, rng):
        b = toy_bases(10)
        params = random_params(rng, b, s=2, p=2, n=4)
        E = rng.standard_normal((4, 2))
        data = simulate_dataset(params, E, b, seed=1)
        bad = params.copy()
        bad.sigma2_alpha = -1.0
        assert log_joint_density(bad, data, b) == -np.inf
        bad = params.copy()
        bad.Omega = -np.eye(params.Omega.shape[0])
        assert log_joint_density(bad, data, b) == -np.inf
        bad = params.copy()
        bad.gamma_sigma = bad.gamma_sigma + 1e4
        assert log_joint_density(bad, data, b) == -np.inf


class TestParamsSerialization:
    def test_round_trip(self, rng):
        b = toy_bases(12)
        params = random_params(rng, b, s=3, p=2, n=6)
        rebuilt = params_from_rows(params_to_rows(params))
        for name in ("alpha_T", "B_T", "alpha_star_R", "B_R", "gamma_sigma", "Omega", "sigma2_beta", "U"):
            np.testing.assert_array_equal(getattr(rebuilt, name), getattr(params, name))
        assert rebuilt.sigma2_alpha == params.sigma2_alpha

    def test_round_trip_without_latents(self, rng):
        b = toy_bases(12)
        params = random_params(rng, b, s=2, p=4)
        rebuilt = params_from_rows(params_to_rows(params))
        assert rebuilt.U is None
        np.testing.assert_array_equal(rebuilt.B_R, params.B_R)

    def test_missing_block_rejected(self, rng):
        b = toy_bases(12)
        params = random_params(rng, b)
        rows = [r for r in params_to_rows(params) if r[0] != "Omega"]
        with pytest.raises(ValueError):
            params_from_rows(rows)
