"""Blocked Gibbs sampler for the joint trait/reflectance model.

Every Gaussian block has its exact full conditional under the joint log
density (the trait-mean blocks condition on the reflectance random effects
through the latent covariance, collapsing to the familiar marginal form when
the cross block is zero). In the sweep, the two wavelength-varying
fixed-effect blocks are drawn with the random effects integrated out and the
random-effects redraw immediately after completes the joint block update;
conditioning on the current random effects instead is also implemented but
leaves a near-collinear direction that stalls mixing. The latent covariance
update is a Wishart draw via the Bartlett decomposition, the shrinkage
scales are conjugate Gamma draws, and the log-variance spline coefficients
use a Gaussian random-walk Metropolis step whose scale is tuned during
burn-in to keep the acceptance rate between 0.2 and 0.6.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .bases import BasisSet
from .model import (
    Dataset,
    Parameters,
    PriorConfig,
    trait_residuals,
    wavelength_variance,
)

__all__ = [
    "SamplerConfig",
    "PosteriorStore",
    "SamplerError",
    "run_chain",
    "initial_parameters",
    "update_B_T",
    "update_B_R",
    "update_alpha_R",
    "update_U_R",
    "update_Omega",
    "update_variances",
    "update_gamma_sigma",
    "adapt_rw_scale",
    "gamma_sigma_log_target",
    "conditional_B_T",
    "conditional_alpha_T",
    "conditional_B_R",
    "conditional_alpha_R",
    "conditional_B_R_marginal",
    "conditional_alpha_R_marginal",
    "conditional_U_R",
    "omega_conditional",
    "variance_conditionals",
    "wishart_rvs",
    "save_store",
    "load_store",
]

logger = logging.getLogger(__name__)

_MAX_LOG_VARIANCE = 700.0


class SamplerError(RuntimeError):
    """A block update failed; the message carries the block and iteration."""


@dataclass(frozen=True)
class SamplerConfig:
    """Chain schedule, proposal tuning, and reproducibility settings."""

    n_iterations: int = 200_000
    n_burnin: int = 100_000
    n_keep: int = 5_000
    rw_scale: float = 0.1
    target_accept_low: float = 0.2
    target_accept_high: float = 0.6
    adapt_window: int = 200
    seed: int = 0
    jitter: float = 1e-10
    gamma_update: str = "block"

    def __post_init__(self):
        if not 0 <= self.n_burnin < self.n_iterations:
            raise ValueError("need 0 <= n_burnin < n_iterations")
        if not 1 <= self.n_keep <= self.n_iterations - self.n_burnin:
            raise ValueError("need 1 <= n_keep <= n_iterations - n_burnin")
        if self.rw_scale <= 0:
            raise ValueError("rw_scale must be positive")
        if not 0.0 < self.target_accept_low < self.target_accept_high < 1.0:
            raise ValueError("acceptance targets must satisfy 0 < low < high < 1")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be at least 1")
        if self.gamma_update not in ("block", "percoord"):
            raise ValueError("gamma_update must be 'block' or 'percoord'")

    @property
    def thin_step(self) -> int:
        return max((self.n_iterations - self.n_burnin) // self.n_keep, 1)


@dataclass(eq=False)
class PosteriorStore:
    """Retained thinned states plus proposal bookkeeping for one chain."""

    states: list[Parameters]
    gamma_accepted: int
    gamma_proposals: int
    post_burnin_accept_rate: float
    rw_scale_trace: np.ndarray
    final_rw_scale: float
    config: SamplerConfig
    variant: str = "joint"
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i) -> Parameters:
        return self.states[i]


# ---------------------------------------------------------------------------
# shared within-sweep caches


class _SweepCaches:
    """Quantities reused across block updates within one sweep.

    Noise-dependent pieces are refreshed only when a log-variance proposal is
    accepted; mean-curve pieces are refreshed by whichever update changes
    them.
    """

    def __init__(self, params: Parameters, data: Dataset, bases: BasisSet):
        self.data = data
        self.bases = bases
        self.EtE = data.E.T @ data.E
        self.refresh_sigma(params)
        self.refresh_alpha_curve(params)
        self.refresh_beta_curve(params)
        self.refresh_u_curve(params)

    def refresh_sigma(self, params: Parameters) -> None:
        bases = self.bases
        self.sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
        self.d_inv = 1.0 / self.sigma2
        col = self.d_inv[:, None]
        self.KtDK_alpha = bases.K_alpha.T @ (col * bases.K_alpha)
        self.KtDK_beta = bases.K_beta.T @ (col * bases.K_beta)
        self.KtDK_U = bases.K_U.T @ (col * bases.K_U)
        self.DK_U = col * bases.K_U

    def refresh_alpha_curve(self, params: Parameters) -> None:
        self.alpha_curve = self.bases.K_alpha @ params.alpha_star_R

    def refresh_beta_curve(self, params: Parameters) -> None:
        self.beta_curve = (self.data.E @ params.B_R) @ self.bases.K_beta.T

    def refresh_u_curve(self, params: Parameters) -> None:
        s = params.s
        self.u_curve = params.U[:, s:] @ self.bases.K_U.T


def _caches(params, data, bases, caches):
    return caches if caches is not None else _SweepCaches(params, data, bases)


# ---------------------------------------------------------------------------
# draw helpers


def _chol_with_jitter(matrix: np.ndarray, jitter: float):
    """Cholesky with relative-jitter escalation (x10, three attempts)."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(matrix)))
    if scale <= 0:
        scale = 1.0
    for attempt in range(3):
        bump = jitter * scale * 10.0**attempt
        logger.debug("cholesky jitter escalated to %g", bump)
        try:
            return np.linalg.cholesky(matrix + bump * np.eye(matrix.shape[0]))
        except np.linalg.LinAlgError:
            if attempt == 2:
                raise
    raise np.linalg.LinAlgError("unreachable")


def _draw_mvn_from_precision(lin, prec, rng, jitter=1e-10):
    """One draw from N(prec^{-1} lin, prec^{-1})."""
    L = _chol_with_jitter(prec, jitter)
    mean = cho_solve((L, True), lin, check_finite=False)
    z = rng.standard_normal(lin.shape[0])
    return mean + solve_triangular(L, z, trans="T", lower=True, check_finite=False)


def _spd_inverse(matrix: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    """Inverse of an SPD matrix that is symmetric PSD by construction.

    Built from the Cholesky factor as L^{-T} L^{-1}; a plain ``inv`` of a
    near-singular conditional covariance can come back indefinite, which
    then poisons every precision assembled from it.
    """
    L = _chol_with_jitter(matrix, jitter)
    X = solve_triangular(L, np.eye(matrix.shape[0]), lower=True, check_finite=False)
    return X.T @ X


def _bartlett_factor(df: float, dim: int, rng, size: int | None = None) -> np.ndarray:
    """Lower-triangular Bartlett factor(s): chi diagonals, normal subdiagonals."""
    if df <= dim - 1:
        raise ValueError("Wishart degrees of freedom must exceed dim - 1")
    shape = (dim, dim) if size is None else (size, dim, dim)
    A = np.zeros(shape)
    diag_df = df - np.arange(dim)
    rows, cols = np.tril_indices(dim, -1)
    if size is None:
        A[np.arange(dim), np.arange(dim)] = np.sqrt(rng.chisquare(diag_df))
        A[rows, cols] = rng.standard_normal(rows.size)
    else:
        A[:, np.arange(dim), np.arange(dim)] = np.sqrt(
            rng.chisquare(np.broadcast_to(diag_df, (size, dim)))
        )
        A[:, rows, cols] = rng.standard_normal((size, rows.size))
    return A


def wishart_rvs(df: float, scale: np.ndarray, rng, size: int | None = None) -> np.ndarray:
    """Wishart draws via the Bartlett decomposition; E[X] = df * scale."""
    dim = scale.shape[0]
    L = np.linalg.cholesky(scale)
    A = _bartlett_factor(df, dim, rng, size=size)
    LA = L @ A
    if size is None:
        return LA @ LA.T
    return np.einsum("mij,mkj->mik", LA, LA)


def _wishart_from_rate(df: float, rate: np.ndarray, rng, jitter: float) -> np.ndarray:
    """Draw from Wishart(df, rate^{-1}) without forming the inverse scale."""
    Ls = _chol_with_jitter(rate, jitter)
    # any F with F F' = rate^{-1} works; orthogonal invariance of the
    # identity-scale Wishart covers the non-triangular factor
    F = solve_triangular(Ls, np.eye(rate.shape[0]), trans="T", lower=True, check_finite=False)
    A = _bartlett_factor(df, rate.shape[0], rng)
    FA = F @ A
    return FA @ FA.T


# ---------------------------------------------------------------------------
# conditional moments (linear term, precision) for the Gaussian blocks


def _trait_given_refl(params: Parameters):
    """Precision of the trait residual given the reflectance effects, plus
    the per-replicate conditional mean offset."""
    s = params.s
    O_T, O_TR, O_R = params.omega_blocks()
    if params.n_u == 0 or not np.any(O_TR):
        offset = np.zeros((params.U.shape[0] if params.U is not None else 0, s))
        return _spd_inverse(O_T), offset
    L_R = np.linalg.cholesky(O_R)
    A = cho_solve((L_R, True), O_TR.T, check_finite=False)  # O_R^{-1} O_TR'
    cond_cov = O_T - O_TR @ A
    prec = _spd_inverse(0.5 * (cond_cov + cond_cov.T))
    offset = params.U[:, s:] @ A
    return prec, offset


def conditional_B_T(params: Parameters, data: Dataset, priors: PriorConfig, trait_ctx=None):
    """Linear term and precision for vec(B_T) in trait-major order.

    Trait-major means index t*p + k, i.e. row t of B_T forms block t, which
    pairs with the kron(trait precision, E'E) layout of the precision.
    """
    s, p = params.B_T.shape
    prec_T, offset = trait_ctx if trait_ctx is not None else _trait_given_refl(params)
    target = data.T - params.alpha_T[None, :] - offset
    G = data.E.T @ (target @ prec_T)
    lin = G.T.ravel()
    prec = np.kron(prec_T, data.E.T @ data.E) + np.eye(s * p) / priors.var_b_t
    return lin, prec


def conditional_alpha_T(params: Parameters, data: Dataset, priors: PriorConfig, trait_ctx=None):
    prec_T, offset = trait_ctx if trait_ctx is not None else _trait_given_refl(params)
    target = data.T - data.E @ params.B_T.T - offset
    lin = prec_T @ target.sum(axis=0)
    prec = data.n * prec_T + np.eye(params.s) / priors.var_alpha_t
    return lin, prec


def conditional_B_R(
    params: Parameters, data: Dataset, bases: BasisSet, priors: PriorConfig, caches=None
):
    """Linear term and precision for vec(B_R) in column-major order."""
    ctx = _caches(params, data, bases, caches)
    resid = data.R - ctx.alpha_curve[None, :] - ctx.u_curve
    G = data.E.T @ (resid * ctx.d_inv) @ bases.K_beta
    lin = G.ravel(order="F")
    prior_var = priors.b_r_variances(bases.n_beta, params.sigma2_beta)
    prec = np.kron(ctx.KtDK_beta, ctx.EtE)
    prec[np.diag_indices_from(prec)] += 1.0 / prior_var
    return lin, prec


def conditional_alpha_R(
    params: Parameters, data: Dataset, bases: BasisSet, priors: PriorConfig, caches=None
):
    ctx = _caches(params, data, bases, caches)
    resid = data.R - ctx.beta_curve - ctx.u_curve
    lin = bases.K_alpha.T @ (ctx.d_inv * resid.sum(axis=0))
    prior_var = priors.alpha_star_variances(bases.n_alpha, params.sigma2_alpha)
    prec = data.n * ctx.KtDK_alpha
    prec[np.diag_indices_from(prec)] += 1.0 / prior_var
    return lin, prec


def conditional_U_R(
    params: Parameters, data: Dataset, bases: BasisSet, priors: PriorConfig, caches=None
):
    """Per-replicate linear terms (n, N_U) and the shared precision.

    The prior for each reflectance random-effect row is its Gaussian
    conditional given the trait residual row, so the cross block of the
    latent covariance feeds trait information into the update.
    """
    ctx = _caches(params, data, bases, caches)
    s = params.s
    O_T, O_TR, O_R = params.omega_blocks()
    L_T = np.linalg.cholesky(O_T)
    B = cho_solve((L_T, True), O_TR, check_finite=False)  # O_T^{-1} O_TR
    cond_cov = O_R - O_TR.T @ B
    cond_prec = _spd_inverse(0.5 * (cond_cov + cond_cov.T))
    prior_mean = params.U[:, :s] @ B
    resid = data.R - ctx.alpha_curve[None, :] - ctx.beta_curve
    lin = resid @ ctx.DK_U + prior_mean @ cond_prec
    prec = ctx.KtDK_U + cond_prec
    return lin, prec


def _marginal_noise_pieces(params: Parameters, caches):
    """Woodbury pieces of V^{-1}, V = K_U cond_cov K_U' + D_sigma.

    V is the reflectance noise covariance once the random effects are
    integrated out (their conditional prior given the trait residuals has
    covariance ``cond_cov``). Returns (capacity C = cond_cov^{-1} + K_U'D^{-1}K_U,
    prior mean matrix of the random effects given the trait block).
    """
    s = params.s
    O_T, O_TR, O_R = params.omega_blocks()
    L_T = np.linalg.cholesky(O_T)
    B = cho_solve((L_T, True), O_TR, check_finite=False)
    cond_cov = O_R - O_TR.T @ B
    capacity = _spd_inverse(0.5 * (cond_cov + cond_cov.T)) + caches.KtDK_U
    prior_mean = params.U[:, :s] @ B
    return capacity, prior_mean


def conditional_B_R_marginal(
    params: Parameters, data: Dataset, bases: BasisSet, priors: PriorConfig, caches=None
):
    """B_R conditional with the random effects integrated out.

    Using the marginal reflectance likelihood removes the near-collinear
    fixed-effect/random-effect direction; the draw must be followed by a
    fresh random-effects draw so the pair forms one joint block update.
    """
    ctx = _caches(params, data, bases, caches)
    capacity, prior_mean = _marginal_noise_pieces(params, ctx)
    L_c = np.linalg.cholesky(capacity)
    target = data.R - ctx.alpha_curve[None, :] - prior_mean @ bases.K_U.T
    # K_beta' V^{-1} K_beta and E' target V^{-1} K_beta via Woodbury
    KtDK_bu = bases.K_beta.T @ ctx.DK_U  # (N_beta, N_U)
    cross = cho_solve((L_c, True), KtDK_bu.T, check_finite=False)
    KtVK = ctx.KtDK_beta - KtDK_bu @ cross
    proj = target @ ctx.DK_U  # (n, N_U)
    lin_mat = data.E.T @ (target @ (ctx.d_inv[:, None] * bases.K_beta) - proj @ cross)
    lin = lin_mat.ravel(order="F")
    prior_var = priors.b_r_variances(bases.n_beta, params.sigma2_beta)
    prec = np.kron(KtVK, ctx.EtE)
    prec[np.diag_indices_from(prec)] += 1.0 / prior_var
    return lin, prec


def conditional_alpha_R_marginal(
    params: Parameters, data: Dataset, bases: BasisSet, priors: PriorConfig, caches=None
):
    """Wavelength-intercept conditional with the random effects integrated out."""
    ctx = _caches(params, data, bases, caches)
    capacity, prior_mean = _marginal_noise_pieces(params, ctx)
    L_c = np.linalg.cholesky(capacity)
    target = data.R - ctx.beta_curve - prior_mean @ bases.K_U.T
    KtDK_au = bases.K_alpha.T @ ctx.DK_U  # (N_alpha, N_U)
    cross = cho_solve((L_c, True), KtDK_au.T, check_finite=False)
    KtVK = ctx.KtDK_alpha - KtDK_au @ cross
    target_sum = target.sum(axis=0)
    lin = bases.K_alpha.T @ (ctx.d_inv * target_sum) - KtDK_au @ (
        cho_solve((L_c, True), ctx.DK_U.T @ target_sum, check_finite=False)
    )
    prior_var = priors.alpha_star_variances(bases.n_alpha, params.sigma2_alpha)
    prec = data.n * KtVK
    prec[np.diag_indices_from(prec)] += 1.0 / prior_var
    return lin, prec


def omega_conditional(params: Parameters, priors: PriorConfig, variant: str = "joint"):
    """Wishart (df, rate) pairs for the latent precision blocks.

    The draw is Omega^{-1} ~ Wishart(df, rate^{-1}); the prior contributes
    ``wishart_rate * I`` to the rate, i.e. a small ridge on U'U.
    """
    U = params.U
    s = params.s
    n = U.shape[0]
    if variant == "joint":
        d = s + params.n_u
        df = d + priors.wishart_df_offset + n
        rate = priors.wishart_rate * np.eye(d) + U.T @ U
        return [(df, rate)]
    if variant == "independent":
        U_T, U_R = U[:, :s], U[:, s:]
        out = []
        for block in (U_T, U_R):
            d = block.shape[1]
            df = d + priors.wishart_df_offset + n
            rate = priors.wishart_rate * np.eye(d) + block.T @ block
            out.append((df, rate))
        return out
    raise ValueError(f"unknown variant {variant!r}")


def variance_conditionals(params: Parameters, priors: PriorConfig):
    """Gamma (shape, rate) for the alpha-star precision and each per-covariate
    coefficient precision (non-intercept entries only)."""
    n_alpha = params.alpha_star_R.shape[0]
    a_alpha = priors.gamma_shape + 0.5 * (n_alpha - 1)
    b_alpha = priors.gamma_rate + 0.5 * float(params.alpha_star_R[1:] @ params.alpha_star_R[1:])
    n_beta = params.B_R.shape[1]
    a_beta = np.full(params.B_R.shape[0], priors.gamma_shape + 0.5 * (n_beta - 1))
    b_beta = priors.gamma_rate + 0.5 * np.sum(params.B_R[:, 1:] ** 2, axis=1)
    return (a_alpha, b_alpha), (a_beta, b_beta)


# ---------------------------------------------------------------------------
# block updates


def update_B_T(params, data, priors, rng, jitter=1e-10):
    """Draw B_T then alpha_T from their full conditionals; returns both."""
    trait_ctx = _trait_given_refl(params)
    lin, prec = conditional_B_T(params, data, priors, trait_ctx)
    B_T = _draw_mvn_from_precision(lin, prec, rng, jitter).reshape(params.B_T.shape)
    # shallow replace: alpha_T conditions on the fresh B_T draw
    lin_a, prec_a = conditional_alpha_T(replace(params, B_T=B_T), data, priors, trait_ctx)
    alpha_T = _draw_mvn_from_precision(lin_a, prec_a, rng, jitter)
    return alpha_T, B_T


def update_B_R(params, data, bases, priors, rng, caches=None, jitter=1e-10, marginal=False):
    """Draw B_R; with ``marginal=True`` the random effects are integrated out
    (the sweep pairs that with an immediate random-effects redraw)."""
    cond = conditional_B_R_marginal if marginal else conditional_B_R
    lin, prec = cond(params, data, bases, priors, caches)
    draw = _draw_mvn_from_precision(lin, prec, rng, jitter)
    return draw.reshape((params.B_R.shape[0], bases.n_beta), order="F")


def update_alpha_R(params, data, bases, priors, rng, caches=None, jitter=1e-10, marginal=False):
    cond = conditional_alpha_R_marginal if marginal else conditional_alpha_R
    lin, prec = cond(params, data, bases, priors, caches)
    return _draw_mvn_from_precision(lin, prec, rng, jitter)


def update_U_R(params, data, bases, priors, rng, j=None, caches=None, jitter=1e-10):
    """Draw the reflectance random effects, all rows (default) or one row j."""
    lin, prec = conditional_U_R(params, data, bases, priors, caches)
    L = _chol_with_jitter(prec, jitter)
    if j is not None:
        mean = cho_solve((L, True), lin[j], check_finite=False)
        z = rng.standard_normal(prec.shape[0])
        return mean + solve_triangular(L, z, trans="T", lower=True, check_finite=False)
    means = cho_solve((L, True), lin.T, check_finite=False).T
    z = rng.standard_normal(means.shape)
    return means + solve_triangular(L, z.T, trans="T", lower=True, check_finite=False).T


def update_Omega(params, priors, rng, variant="joint", jitter=1e-10):
    """Wishart draw(s) for the latent precision; returns the covariance."""
    blocks = omega_conditional(params, priors, variant)
    draws = []
    for df, rate in blocks:
        for attempt in range(3):
            try:
                lam = _wishart_from_rate(df, rate, rng, jitter)
                L = np.linalg.cholesky(lam)
                omega = cho_solve((L, True), np.eye(lam.shape[0]), check_finite=False)
                draws.append(0.5 * (omega + omega.T))
                break
            except np.linalg.LinAlgError:
                if attempt == 2:
                    raise
                logger.warning("singular Wishart draw, retrying with jitter")
                rate = rate + jitter * float(np.mean(np.diag(rate))) * np.eye(rate.shape[0])
    if variant == "joint":
        return draws[0]
    d = params.Omega.shape[0]
    omega = np.zeros((d, d))
    s = params.s
    omega[:s, :s] = draws[0]
    omega[s:, s:] = draws[1]
    return omega


def update_variances(params, priors, rng):
    (a_alpha, b_alpha), (a_beta, b_beta) = variance_conditionals(params, priors)
    sigma2_alpha = 1.0 / rng.gamma(a_alpha, 1.0 / b_alpha)
    sigma2_beta = 1.0 / rng.gamma(a_beta, 1.0 / b_beta)
    return float(sigma2_alpha), sigma2_beta


def gamma_sigma_log_target(gamma, n, ss_w, K_sigma, priors):
    """Log density terms that move with the log-variance coefficients.

    Equals the joint log density up to an additive constant, which is all
    the Metropolis ratio needs.
    """
    eta = K_sigma @ gamma
    if np.any(np.abs(eta) > _MAX_LOG_VARIANCE):
        return -np.inf
    ll = -0.5 * (n * float(eta.sum()) + float(ss_w @ np.exp(-eta)))
    lp = -0.5 * gamma[0] ** 2 / priors.var_gamma_intercept
    if gamma.shape[0] > 1:
        lp -= 0.5 * float(gamma[1:] @ gamma[1:]) / priors.var_gamma
    return ll + lp


def update_gamma_sigma(
    params, data, bases, priors, rng, rw_scale, caches=None, mode="block"
):
    """Random-walk Metropolis step; returns (gamma, n_accepted, n_proposed)."""
    ctx = _caches(params, data, bases, caches)
    resid = data.R - ctx.alpha_curve[None, :] - ctx.beta_curve - ctx.u_curve
    ss_w = np.einsum("ij,ij->j", resid, resid)
    n = data.n
    K_sigma = bases.K_sigma
    current = params.gamma_sigma.copy()
    current_lt = gamma_sigma_log_target(current, n, ss_w, K_sigma, priors)
    if mode == "block":
        proposal = current + rw_scale * rng.standard_normal(current.shape[0])
        proposal_lt = gamma_sigma_log_target(proposal, n, ss_w, K_sigma, priors)
        log_u = math.log(max(rng.uniform(), 1e-300))
        if np.isfinite(proposal_lt) and log_u < proposal_lt - current_lt:
            return proposal, 1, 1
        return current, 0, 1
    if mode == "percoord":
        accepted = 0
        for i in range(current.shape[0]):
            proposal = current.copy()
            proposal[i] += rw_scale * rng.standard_normal()
            proposal_lt = gamma_sigma_log_target(proposal, n, ss_w, K_sigma, priors)
            log_u = math.log(max(rng.uniform(), 1e-300))
            if np.isfinite(proposal_lt) and log_u < proposal_lt - current_lt:
                current = proposal
                current_lt = proposal_lt
                accepted += 1
        return current, accepted, current.shape[0]
    raise ValueError(f"unknown gamma update mode {mode!r}")


def adapt_rw_scale(accept_rate, rw_scale, low=0.2, high=0.6):
    """Shrink or grow the proposal scale when the windowed rate leaves the band."""
    if accept_rate < low:
        return rw_scale * 0.8
    if accept_rate > high:
        return rw_scale * 1.25
    return rw_scale


# ---------------------------------------------------------------------------
# initialization and the main loop


def initial_parameters(data: Dataset, bases: BasisSet, priors: PriorConfig) -> Parameters:
    """Least-squares and ridge-projection starting values near the data mode."""
    n, s, p = data.n, data.s, data.p
    if n == 0:
        raise ValueError("cannot initialize a chain on an empty dataset")
    ridge = 1e-6
    X = np.column_stack([np.ones(n), data.E])
    coef, *_ = np.linalg.lstsq(X, data.T, rcond=None)
    alpha_T = coef[0]
    B_T = coef[1:].T

    K_a = bases.K_alpha
    mean_spec = data.R.mean(axis=0)
    alpha_star = np.linalg.solve(
        K_a.T @ K_a + ridge * np.eye(bases.n_alpha), K_a.T @ mean_spec
    )
    centered = data.R - (K_a @ alpha_star)[None, :]
    EtE = data.E.T @ data.E
    curves = np.linalg.solve(EtE + ridge * np.eye(p), data.E.T @ centered)
    K_b = bases.K_beta
    B_R = np.linalg.solve(
        K_b.T @ K_b + ridge * np.eye(bases.n_beta), K_b.T @ curves.T
    ).T
    resid = centered - (data.E @ B_R) @ K_b.T
    # per-replicate ridge projection of the residual spectra onto the
    # random-effect basis; starting from zero leaves the early latent
    # covariance draws free to lock onto a spurious trait/spectrum coupling
    K_u = bases.K_U
    U_R = np.linalg.solve(K_u.T @ K_u + ridge * np.eye(bases.n_u), K_u.T @ resid.T).T
    noise = resid - U_R @ K_u.T
    point_var = noise.var(axis=0) + 1e-6
    K_s = bases.K_sigma
    gamma = np.linalg.solve(
        K_s.T @ K_s + ridge * np.eye(bases.n_sigma), K_s.T @ np.log(point_var)
    )

    d = s + bases.n_u
    params = Parameters(
        alpha_T=alpha_T,
        B_T=B_T,
        alpha_star_R=alpha_star,
        B_R=B_R,
        gamma_sigma=gamma,
        Omega=np.eye(d),
        sigma2_alpha=1.0,
        sigma2_beta=np.ones(p),
        U=np.hstack([np.zeros((n, s)), U_R]),
    )
    params.U[:, :s] = trait_residuals(params, data.E, data.T)
    # start the latent covariance at the (ridged) empirical covariance of
    # the initial latents so the first Wishart draws are well conditioned
    emp = params.U.T @ params.U / max(n, 1)
    params.Omega = 0.5 * (emp + emp.T) + 0.1 * np.eye(d)
    return params


def run_chain(
    data: Dataset,
    bases: BasisSet,
    config: SamplerConfig,
    priors: PriorConfig | None = None,
    variant: str = "joint",
    init: Parameters | None = None,
) -> PosteriorStore:
    """Run one chain and return the thinned posterior store.

    The sweep order is fixed: trait means (with the trait residual refreshed
    immediately), reflectance coefficient matrix, wavelength intercept,
    reflectance random effects, latent covariance, shrinkage scales, and the
    log-variance Metropolis step. Proposal-scale adaptation runs only during
    burn-in so the post-burn-in chain has a fixed kernel. Deterministic for
    a given config seed.
    """
    if variant not in ("joint", "independent"):
        raise ValueError(f"unknown variant {variant!r}")
    if priors is None:
        priors = PriorConfig()
    rng = np.random.default_rng(config.seed)
    params = init.copy() if init is not None else initial_parameters(data, bases, priors)
    s = data.s
    if params.U is None:
        params.U = np.zeros((data.n, s + bases.n_u))
        params.U[:, :s] = trait_residuals(params, data.E, data.T)
    if variant == "independent":
        params.Omega = params.Omega.copy()
        params.Omega[:s, s:] = 0.0
        params.Omega[s:, :s] = 0.0

    caches = _SweepCaches(params, data, bases)
    step = config.thin_step
    states: list[Parameters] = []
    rw_scale = config.rw_scale
    trace = [(0, rw_scale)]
    window_accepted = 0
    window_proposed = 0
    total_accepted = 0
    total_proposed = 0
    post_accepted = 0
    post_proposed = 0

    block = "init"
    for iteration in range(1, config.n_iterations + 1):
        try:
            block = "B_T"
            params.alpha_T, params.B_T = update_B_T(params, data, priors, rng, config.jitter)
            params.U[:, :s] = trait_residuals(params, data.E, data.T)

            # the two fixed-effect curve blocks are drawn with the random
            # effects integrated out, and the random-effects redraw right
            # after completes the joint block update; conditioning on the
            # current random effects instead leaves a near-collinear
            # direction that stalls the chain
            block = "B_R"
            params.B_R = update_B_R(
                params, data, bases, priors, rng, caches, config.jitter, marginal=True
            )
            caches.refresh_beta_curve(params)

            block = "alpha_R"
            params.alpha_star_R = update_alpha_R(
                params, data, bases, priors, rng, caches, config.jitter, marginal=True
            )
            caches.refresh_alpha_curve(params)

            block = "U_R"
            params.U[:, s:] = update_U_R(
                params, data, bases, priors, rng, caches=caches, jitter=config.jitter
            )
            caches.refresh_u_curve(params)

            block = "Omega"
            params.Omega = update_Omega(params, priors, rng, variant, config.jitter)

            block = "variances"
            params.sigma2_alpha, params.sigma2_beta = update_variances(params, priors, rng)

            block = "gamma_sigma"
            gamma, accepted, proposed = update_gamma_sigma(
                params, data, bases, priors, rng, rw_scale, caches, config.gamma_update
            )
            if accepted:
                params.gamma_sigma = gamma
                caches.refresh_sigma(params)
        except Exception as exc:  # noqa: BLE001 - annotate and re-raise
            raise SamplerError(
                f"{block} update failed at iteration {iteration}: {exc}"
            ) from exc

        total_accepted += accepted
        total_proposed += proposed
        if iteration <= config.n_burnin:
            window_accepted += accepted
            window_proposed += proposed
            if iteration % config.adapt_window == 0:
                rate = window_accepted / max(window_proposed, 1)
                rw_scale = adapt_rw_scale(
                    rate, rw_scale, config.target_accept_low, config.target_accept_high
                )
                trace.append((iteration, rw_scale))
                window_accepted = 0
                window_proposed = 0
        else:
            post_accepted += accepted
            post_proposed += proposed
            offset = iteration - config.n_burnin
            if offset % step == 0 and len(states) < config.n_keep:
                states.append(params.copy())

    return PosteriorStore(
        states=states,
        gamma_accepted=total_accepted,
        gamma_proposals=total_proposed,
        post_burnin_accept_rate=post_accepted / max(post_proposed, 1),
        rw_scale_trace=np.array(trace, dtype=float),
        final_rw_scale=rw_scale,
        config=config,
        variant=variant,
    )


# ---------------------------------------------------------------------------
# persistence

_STORE_BLOCKS = (
    "alpha_T",
    "B_T",
    "alpha_star_R",
    "B_R",
    "gamma_sigma",
    "Omega",
    "U",
    "sigma2_alpha",
    "sigma2_beta",
)


def save_store(store: PosteriorStore, path) -> None:
    """Persist a store to a directory; the round trip is byte-exact."""
    from pathlib import Path

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    first = store.states[0]
    dims = {
        "n_states": len(store.states),
        "n": 0 if first.U is None else int(first.U.shape[0]),
        "s": int(first.s),
        "p": int(first.B_T.shape[1]),
        "n_alpha": int(first.alpha_star_R.shape[0]),
        "n_beta": int(first.B_R.shape[1]),
        "n_sigma": int(first.gamma_sigma.shape[0]),
        "n_u": int(first.n_u),
    }
    meta = {
        "config": asdict(store.config),
        "variant": store.variant,
        "gamma_accepted": int(store.gamma_accepted),
        "gamma_proposals": int(store.gamma_proposals),
        "post_burnin_accept_rate": float(store.post_burnin_accept_rate),
        "final_rw_scale": float(store.final_rw_scale),
        "dims": dims,
        "extra": store.extra,
    }
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(path / "rw_scale_trace.csv", "w") as fh:
        fh.write("iteration,rw_scale\n")
        for it, scale in store.rw_scale_trace:
            fh.write(f"{int(it)},{float(scale)!r}\n")
    for name in _STORE_BLOCKS:
        with open(path / f"{name}.csv", "w") as fh:
            fh.write("sample_index,flat_index,value\n")
            for m, state in enumerate(store.states):
                block = getattr(state, name)
                flat = np.atleast_1d(np.asarray(block, dtype=float)).ravel()
                fh.writelines(
                    f"{m},{i},{float(v)!r}\n" for i, v in enumerate(flat)
                )


def load_store(path) -> PosteriorStore:
    """Rebuild a store saved by :func:`save_store`."""
    from pathlib import Path

    path = Path(path)
    with open(path / "meta.json") as fh:
        meta = json.load(fh)
    dims = meta["dims"]
    n_states = dims["n_states"]
    shapes = {
        "alpha_T": (dims["s"],),
        "B_T": (dims["s"], dims["p"]),
        "alpha_star_R": (dims["n_alpha"],),
        "B_R": (dims["p"], dims["n_beta"]),
        "gamma_sigma": (dims["n_sigma"],),
        "Omega": (dims["s"] + dims["n_u"], dims["s"] + dims["n_u"]),
        "U": (dims["n"], dims["s"] + dims["n_u"]),
        "sigma2_alpha": (1,),
        "sigma2_beta": (dims["p"],),
    }
    blocks = {}
    for name in _STORE_BLOCKS:
        size = int(np.prod(shapes[name]))
        flat = np.empty((n_states, size))
        with open(path / f"{name}.csv") as fh:
            header = next(fh)
            if header.strip() != "sample_index,flat_index,value":
                raise ValueError(f"unexpected header in {name}.csv")
            for line in fh:
                m, i, v = line.split(",")
                flat[int(m), int(i)] = float(v)
        blocks[name] = flat.reshape((n_states, *shapes[name]))
    states = []
    for m in range(n_states):
        states.append(
            Parameters(
                alpha_T=blocks["alpha_T"][m],
                B_T=blocks["B_T"][m],
                alpha_star_R=blocks["alpha_star_R"][m],
                B_R=blocks["B_R"][m],
                gamma_sigma=blocks["gamma_sigma"][m],
                Omega=blocks["Omega"][m],
                sigma2_alpha=float(blocks["sigma2_alpha"][m][0]),
                sigma2_beta=blocks["sigma2_beta"][m],
                U=blocks["U"][m],
            )
        )
    trace = []
    with open(path / "rw_scale_trace.csv") as fh:
        next(fh)
        for line in fh:
            it, scale = line.split(",")
            trace.append((int(it), float(scale)))
    return PosteriorStore(
        states=states,
        gamma_accepted=meta["gamma_accepted"],
        gamma_proposals=meta["gamma_proposals"],
        post_burnin_accept_rate=meta["post_burnin_accept_rate"],
        rw_scale_trace=np.array(trace, dtype=float),
        final_rw_scale=meta["final_rw_scale"],
        config=SamplerConfig(**meta["config"]),
        variant=meta["variant"],
        extra=meta.get("extra", {}),
    )
