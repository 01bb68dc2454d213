"""Conditional cross-prediction and posterior summaries.

For a site where only one response block was measured, the other block is
predicted by conditional normal theory: the latent random effects are
inferred from the observed block, carried across through the latent
covariance, and pushed through the model equations. Every retained
posterior state contributes one predictive draw, so the output set carries
full parameter uncertainty.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .bases import BasisSet
from .model import (
    Parameters,
    coefficient_functions,
    trait_reflectance_correlation,
    wavelength_variance,
)
from .sampler import PosteriorStore, _chol_with_jitter, _spd_inverse

__all__ = [
    "PartialSite",
    "PredictionSet",
    "PosteriorSummary",
    "infer_latent_U_from_R",
    "latent_given_R_moments",
    "traits_given_R_moments",
    "reflectance_given_T_moments",
    "predict_traits_given_R",
    "predict_R_given_traits",
    "summarize_posterior",
]


@dataclass(eq=False)
class PartialSite:
    """A site with covariates and exactly one observed response block."""

    site_id: str
    E: np.ndarray
    T: np.ndarray | None = None
    R: np.ndarray | None = None

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        if self.T is not None:
            self.T = np.asarray(self.T, dtype=float)
        if self.R is not None:
            self.R = np.asarray(self.R, dtype=float)
        if (self.T is None) == (self.R is None):
            raise ValueError(
                f"site {self.site_id!r} must carry exactly one of traits or reflectance"
            )


@dataclass(eq=False)
class PredictionSet:
    """Per-state predictive draws plus pointwise summaries."""

    site_id: str
    kind: str
    samples: np.ndarray
    mean: np.ndarray = field(init=False)
    q05: np.ndarray = field(init=False)
    q95: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean = self.samples.mean(axis=0)
        self.q05 = np.quantile(self.samples, 0.05, axis=0)
        self.q95 = np.quantile(self.samples, 0.95, axis=0)


def _latent_chol(params: Parameters, bases: BasisSet):
    sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
    d_inv = 1.0 / sigma2
    O_T, O_TR, O_R = params.omega_blocks()
    prec = bases.K_U.T @ (d_inv[:, None] * bases.K_U) + _spd_inverse(O_R)
    return sigma2, d_inv, _chol_with_jitter(prec, 1e-10)


def latent_given_R_moments(params: Parameters, bases: BasisSet, E: np.ndarray, R: np.ndarray):
    """Mean(s) and covariance of the reflectance random effects given a
    spectrum, under the marginal latent prior N(0, Omega_R).

    ``E`` and ``R`` may be single vectors or (m, p)/(m, W) batches; the
    covariance is shared across sites because the noise curve is.
    """
    E = np.atleast_2d(E)
    R = np.atleast_2d(R)
    sigma2, d_inv, L = _latent_chol(params, bases)
    fixed = (bases.K_alpha @ params.alpha_star_R)[None, :] + (E @ params.B_R) @ bases.K_beta.T
    lin = (R - fixed) @ (d_inv[:, None] * bases.K_U)
    means = cho_solve((L, True), lin.T, check_finite=False).T
    cov = _spd_inverse(L @ L.T)
    return means, cov


def infer_latent_U_from_R(
    params: Parameters, site: PartialSite, bases: BasisSet, rng
) -> np.ndarray:
    """Draw the reflectance random effects for a new site from its observed
    spectrum; the trait-coupling prior term is dropped since traits are the
    quantity being predicted."""
    if site.R is None:
        raise ValueError("site has no observed reflectance")
    means, cov = latent_given_R_moments(params, bases, site.E, site.R)
    L = _chol_with_jitter(cov, 1e-10)
    return means[0] + L @ rng.standard_normal(cov.shape[0])


def traits_given_R_moments(params: Parameters, bases: BasisSet, E: np.ndarray, R: np.ndarray):
    """Predictive mean(s) and shared covariance of the trait vector given a
    spectrum, with the latent inference step composed analytically."""
    E = np.atleast_2d(E)
    means_u, cov_u = latent_given_R_moments(params, bases, E, R)
    s = params.s
    O_T, O_TR, O_R = params.omega_blocks()
    gain = O_TR @ _spd_inverse(O_R)  # maps latent reflectance effects to traits
    cond_cov = O_T - gain @ O_TR.T
    mean = params.alpha_T[None, :] + E @ params.B_T.T + means_u @ gain.T
    cov = cond_cov + gain @ cov_u @ gain.T
    return mean, 0.5 * (cov + cov.T)


def reflectance_given_T_moments(params: Parameters, bases: BasisSet, E: np.ndarray, T: np.ndarray):
    """Predictive mean(s) and shared covariance of the spectrum given traits.

    The trait residual is exact, the latent reflectance effects follow their
    conditional given it, and the pointwise noise adds to the diagonal.
    Forming the full (W, W) covariance is intended for small grids; the
    sampling path never builds it.
    """
    E = np.atleast_2d(E)
    T = np.atleast_2d(T)
    s = params.s
    O_T, O_TR, O_R = params.omega_blocks()
    u_t = T - params.alpha_T[None, :] - E @ params.B_T.T
    gain = O_TR.T @ _spd_inverse(O_T)
    cond_cov = O_R - gain @ O_TR
    sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
    fixed = (bases.K_alpha @ params.alpha_star_R)[None, :] + (E @ params.B_R) @ bases.K_beta.T
    mean = fixed + (u_t @ gain.T) @ bases.K_U.T
    cov = bases.K_U @ cond_cov @ bases.K_U.T
    cov[np.diag_indices_from(cov)] += sigma2
    return mean, 0.5 * (cov + cov.T)


def _predict_traits_samples(store: PosteriorStore, E, R, bases: BasisSet, rng) -> np.ndarray:
    """(M, m, s) predictive trait draws for m sites with observed spectra."""
    E = np.atleast_2d(E)
    R = np.atleast_2d(R)
    m = E.shape[0]
    s = store.states[0].s
    out = np.empty((len(store.states), m, s))
    for i, params in enumerate(store.states):
        means_u, cov_u = latent_given_R_moments(params, bases, E, R)
        L_u = _chol_with_jitter(cov_u, 1e-10)
        u_r = means_u + rng.standard_normal(means_u.shape) @ L_u.T
        O_T, O_TR, O_R = params.omega_blocks()
        gain = O_TR @ _spd_inverse(O_R)
        cond_cov = O_T - gain @ O_TR.T
        L_t = _chol_with_jitter(0.5 * (cond_cov + cond_cov.T), 1e-10)
        u_t = u_r @ gain.T + rng.standard_normal((m, s)) @ L_t.T
        out[i] = params.alpha_T[None, :] + E @ params.B_T.T + u_t
    return out


def _predict_reflectance_samples(store: PosteriorStore, E, T, bases: BasisSet, rng) -> np.ndarray:
    """(M, m, W) predictive spectrum draws for m sites with observed traits."""
    E = np.atleast_2d(E)
    T = np.atleast_2d(T)
    m = E.shape[0]
    W = bases.grid.n_points
    out = np.empty((len(store.states), m, W))
    for i, params in enumerate(store.states):
        s = params.s
        O_T, O_TR, O_R = params.omega_blocks()
        u_t = T - params.alpha_T[None, :] - E @ params.B_T.T
        gain = O_TR.T @ _spd_inverse(O_T)
        cond_cov = O_R - gain @ O_TR
        L_u = _chol_with_jitter(0.5 * (cond_cov + cond_cov.T), 1e-10)
        u_r = u_t @ gain.T + rng.standard_normal((m, O_R.shape[0])) @ L_u.T
        sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
        fixed = (bases.K_alpha @ params.alpha_star_R)[None, :] + (E @ params.B_R) @ bases.K_beta.T
        psi = rng.standard_normal((m, W)) * np.sqrt(sigma2)[None, :]
        out[i] = fixed + u_r @ bases.K_U.T + psi
    return out


def _as_rng(rng) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(0)
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def predict_traits_given_R(
    store: PosteriorStore, site: PartialSite, bases: BasisSet, rng=None
) -> PredictionSet:
    """Predict the trait vector at a site whose spectrum was observed."""
    if site.R is None:
        raise ValueError(f"site {site.site_id!r} has no observed reflectance")
    samples = _predict_traits_samples(store, site.E, site.R, bases, _as_rng(rng))
    return PredictionSet(site_id=site.site_id, kind="traits", samples=samples[:, 0, :])


def predict_R_given_traits(
    store: PosteriorStore, site: PartialSite, bases: BasisSet, rng=None
) -> PredictionSet:
    """Predict the log-reflectance spectrum at a site whose traits were observed."""
    if site.T is None:
        raise ValueError(f"site {site.site_id!r} has no observed traits")
    samples = _predict_reflectance_samples(store, site.E, site.T, bases, _as_rng(rng))
    return PredictionSet(site_id=site.site_id, kind="reflectance", samples=samples[:, 0, :])


@dataclass(eq=False)
class PosteriorSummary:
    """Pointwise posterior means, 90% intervals, and zero-exclusion flags."""

    coef_curves_mean: np.ndarray
    coef_curves_q05: np.ndarray
    coef_curves_q95: np.ndarray
    trait_coef_mean: np.ndarray
    trait_coef_q05: np.ndarray
    trait_coef_q95: np.ndarray
    correlation_mean: np.ndarray
    correlation_q05: np.ndarray
    correlation_q95: np.ndarray

    def coef_curves_significant(self) -> np.ndarray:
        return (self.coef_curves_q05 > 0) | (self.coef_curves_q95 < 0)

    def trait_coef_significant(self) -> np.ndarray:
        return (self.trait_coef_q05 > 0) | (self.trait_coef_q95 < 0)

    def correlation_significant(self) -> np.ndarray:
        return (self.correlation_q05 > 0) | (self.correlation_q95 < 0)


def summarize_posterior(store: PosteriorStore, bases: BasisSet) -> PosteriorSummary:
    """Coefficient curves, trait coefficients, and correlation curves with
    posterior means and central 90% intervals."""
    if len(store.states) == 0:
        raise ValueError("empty posterior store")
    if len(store.states) < 20:
        warnings.warn(
            "fewer than 20 posterior states; 90% intervals are unreliable",
            stacklevel=2,
        )
    curves = np.stack(
        [coefficient_functions(st.B_R, bases.K_beta) for st in store.states]
    )
    trait_coef = np.stack([st.B_T for st in store.states])
    corr = np.stack(
        [trait_reflectance_correlation(st, bases) for st in store.states]
    )

    def q(x, level):
        return np.quantile(x, level, axis=0)

    return PosteriorSummary(
        coef_curves_mean=curves.mean(axis=0),
        coef_curves_q05=q(curves, 0.05),
        coef_curves_q95=q(curves, 0.95),
        trait_coef_mean=trait_coef.mean(axis=0),
        trait_coef_q05=q(trait_coef, 0.05),
        trait_coef_q95=q(trait_coef, 0.95),
        correlation_mean=corr.mean(axis=0),
        correlation_q05=q(corr, 0.05),
        correlation_q95=q(corr, 0.95),
    )
