"""Joint model for a multivariate trait vector and a functional reflectance spectrum.

Traits follow a multivariate Gaussian regression on scalar covariates whose
errors are the trait block of a shared latent vector. Log reflectance follows
a function-on-scalar regression built from the kernel bases, with low-rank
random effects forming the reflectance block of the same latent vector and
independent wavelength-specific noise whose log variance is a linear spline.
The latent blocks share a joint covariance that carries all residual
trait/spectrum dependence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.linalg import cho_solve, solve_triangular

from .bases import BasisSet, WavelengthGrid

__all__ = [
    "CovariateTransform",
    "Dataset",
    "PriorConfig",
    "Parameters",
    "standardize_covariates",
    "wavelength_variance",
    "coefficient_functions",
    "reflectance_fixed_effects",
    "trait_residuals",
    "InducedCovariance",
    "induced_sigma",
    "trait_reflectance_correlation",
    "simulate_dataset",
    "log_joint_density",
    "params_to_rows",
    "params_from_rows",
]

_LOG_2PI = math.log(2.0 * math.pi)
# exp overflows past ~709; reject log-variance curves before that point
_MAX_LOG_VARIANCE = 700.0


@dataclass(frozen=True)
class CovariateTransform:
    """Column centering/scaling fitted on training covariates."""

    means: np.ndarray
    scales: np.ndarray

    def apply(self, E: np.ndarray) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        return (E - self.means) / self.scales


def standardize_covariates(
    E: np.ndarray, transform: CovariateTransform | None = None
) -> tuple[np.ndarray, CovariateTransform]:
    """Center and scale covariate columns to mean 0, sample sd 1.

    When ``transform`` is given it is applied as-is, so prediction-time
    inputs receive exactly the training-time treatment.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2:
        raise ValueError("covariate matrix must be 2-d")
    if transform is None:
        means = E.mean(axis=0)
        scales = E.std(axis=0, ddof=1)
        if np.any(scales <= 0) or not np.all(np.isfinite(scales)):
            bad = np.where(~(scales > 0))[0]
            raise ValueError(f"constant covariate column(s): {bad.tolist()}")
        transform = CovariateTransform(means=means, scales=scales)
    return transform.apply(E), transform


@dataclass(eq=False)
class Dataset:
    """Aligned covariates, log traits, and log reflectance for n replicates.

    A fitting dataset is complete-case: every replicate carries all three
    blocks and no entry is missing. Partially observed sites are handled by
    the prediction module instead.
    """

    E: np.ndarray
    T: np.ndarray
    R: np.ndarray
    grid: WavelengthGrid
    site_ids: np.ndarray
    trait_names: tuple[str, ...] = ()
    covariate_names: tuple[str, ...] = ()
    species: np.ndarray | None = None

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        self.T = np.asarray(self.T, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.site_ids = np.asarray(self.site_ids)
        n = self.E.shape[0]
        if self.T.shape[0] != n or self.R.shape[0] != n or self.site_ids.shape[0] != n:
            raise ValueError("E, T, R, and site_ids must agree on the number of replicates")
        if self.R.shape[1] != self.grid.n_points:
            raise ValueError("reflectance width does not match the wavelength grid")
        for name, block in (("E", self.E), ("T", self.T), ("R", self.R)):
            if not np.all(np.isfinite(block)):
                raise ValueError(f"{name} contains missing or non-finite values")
        if not self.trait_names:
            self.trait_names = tuple(f"t{i + 1}" for i in range(self.T.shape[1]))
        if not self.covariate_names:
            self.covariate_names = tuple(f"e{i + 1}" for i in range(self.E.shape[1]))

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def s(self) -> int:
        return self.T.shape[1]

    @property
    def p(self) -> int:
        return self.E.shape[1]

    @property
    def n_wavelengths(self) -> int:
        return self.R.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            E=self.E[idx],
            T=self.T[idx],
            R=self.R[idx],
            grid=self.grid,
            site_ids=self.site_ids[idx],
            trait_names=self.trait_names,
            covariate_names=self.covariate_names,
            species=None if self.species is None else self.species[idx],
        )


@dataclass(frozen=True)
class PriorConfig:
    """Prior hyperparameters, each individually overridable.

    ``wishart_rate`` parameterizes the latent-covariance prior as
    Omega^{-1} ~ Wishart(s + N_U + wishart_df_offset, (wishart_rate * I)^{-1})
    so the posterior scale is (wishart_rate * I + U'U)^{-1}; the rate acts as
    a small ridge on the latent cross-product matrix.
    """

    var_alpha_star_intercept: float = 1e3
    var_b_r_intercept: float = 1e3
    var_alpha_t: float = 1e3
    var_b_t: float = 1e3
    var_gamma_intercept: float = 1e4
    var_gamma: float = 9.0
    wishart_rate: float = 1e-3
    wishart_df_offset: float = 1.0
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0

    def alpha_star_variances(self, n_alpha: int, sigma2_alpha: float) -> np.ndarray:
        v = np.full(n_alpha, sigma2_alpha)
        v[0] = self.var_alpha_star_intercept
        return v

    def b_r_variances(self, n_beta: int, sigma2_beta: np.ndarray) -> np.ndarray:
        """Prior variances for vec(B_R) in column-major order."""
        p = sigma2_beta.shape[0]
        return np.concatenate(
            [np.full(p, self.var_b_r_intercept), np.tile(sigma2_beta, n_beta - 1)]
        )


@dataclass
class Parameters:
    """One full state of the joint model.

    The first ``s`` columns of ``U`` hold the trait residuals, which are a
    deterministic function of the trait block: traits carry no separate noise
    term, so the sampler maintains that block exactly rather than drawing it.
    ``U`` may be None for population-level parameter sets (e.g. simulation
    truths) that are not tied to a dataset.
    """

    alpha_T: np.ndarray
    B_T: np.ndarray
    alpha_star_R: np.ndarray
    B_R: np.ndarray
    gamma_sigma: np.ndarray
    Omega: np.ndarray
    sigma2_alpha: float
    sigma2_beta: np.ndarray
    U: np.ndarray | None = None

    def __post_init__(self):
        self.alpha_T = np.asarray(self.alpha_T, dtype=float)
        self.B_T = np.asarray(self.B_T, dtype=float)
        self.alpha_star_R = np.asarray(self.alpha_star_R, dtype=float)
        self.B_R = np.asarray(self.B_R, dtype=float)
        self.gamma_sigma = np.asarray(self.gamma_sigma, dtype=float)
        self.Omega = np.asarray(self.Omega, dtype=float)
        self.sigma2_beta = np.asarray(self.sigma2_beta, dtype=float)
        if self.U is not None:
            self.U = np.asarray(self.U, dtype=float)

    @property
    def s(self) -> int:
        return self.alpha_T.shape[0]

    @property
    def n_u(self) -> int:
        return self.Omega.shape[0] - self.s

    def omega_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = self.s
        return self.Omega[:s, :s], self.Omega[:s, s:], self.Omega[s:, s:]

    def copy(self) -> "Parameters":
        return Parameters(
            alpha_T=self.alpha_T.copy(),
            B_T=self.B_T.copy(),
            alpha_star_R=self.alpha_star_R.copy(),
            B_R=self.B_R.copy(),
            gamma_sigma=self.gamma_sigma.copy(),
            Omega=self.Omega.copy(),
            sigma2_alpha=float(self.sigma2_alpha),
            sigma2_beta=self.sigma2_beta.copy(),
            U=None if self.U is None else self.U.copy(),
        )


def wavelength_variance(gamma_sigma: np.ndarray, K_sigma: np.ndarray) -> np.ndarray:
    """Pointwise noise variances exp(K_sigma @ gamma_sigma)."""
    gamma_sigma = np.asarray(gamma_sigma, dtype=float)
    if K_sigma.shape[1] != gamma_sigma.shape[0]:
        raise ValueError("gamma_sigma length does not match K_sigma columns")
    eta = K_sigma @ gamma_sigma
    if np.any(np.abs(eta) > _MAX_LOG_VARIANCE):
        raise OverflowError("log-variance curve exceeds the overflow guard")
    return np.exp(eta)


def coefficient_functions(B_R: np.ndarray, K_beta: np.ndarray) -> np.ndarray:
    """Wavelength-varying regression coefficient curves, one row per covariate."""
    B_R = np.asarray(B_R, dtype=float)
    if B_R.ndim != 2 or B_R.shape[1] != K_beta.shape[1]:
        raise ValueError("B_R columns must match K_beta columns")
    return B_R @ K_beta.T


def reflectance_fixed_effects(params: Parameters, bases: BasisSet, E: np.ndarray) -> np.ndarray:
    """Fixed-effect reflectance mean for each replicate (n, W)."""
    curve = bases.K_alpha @ params.alpha_star_R
    return curve[None, :] + (E @ params.B_R) @ bases.K_beta.T


def trait_residuals(params: Parameters, E: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Exact trait residuals T - alpha_T - E B_T', the trait block of U."""
    return T - params.alpha_T[None, :] - E @ params.B_T.T


@dataclass(eq=False)
class InducedCovariance:
    """Covariance of the stacked (traits, reflectance) vector for one replicate."""

    Sigma: np.ndarray
    n_traits: int

    @property
    def trait_block(self) -> np.ndarray:
        return self.Sigma[: self.n_traits, : self.n_traits]

    @property
    def cross_block(self) -> np.ndarray:
        return self.Sigma[: self.n_traits, self.n_traits :]

    @property
    def reflectance_block(self) -> np.ndarray:
        return self.Sigma[self.n_traits :, self.n_traits :]


def _require_spd(Omega: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(Omega)
    except np.linalg.LinAlgError:
        raise ValueError("latent covariance is not symmetric positive definite") from None


def induced_sigma(params: Parameters, bases: BasisSet) -> InducedCovariance:
    """Assemble the (s + W) x (s + W) covariance implied by the latent structure."""
    _require_spd(params.Omega)
    O_T, O_TR, O_R = params.omega_blocks()
    sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
    cross = O_TR @ bases.K_U.T
    refl = bases.K_U @ O_R @ bases.K_U.T
    refl[np.diag_indices_from(refl)] += sigma2
    top = np.hstack([O_T, cross])
    bottom = np.hstack([cross.T, refl])
    Sigma = np.vstack([top, bottom])
    Sigma = 0.5 * (Sigma + Sigma.T)
    return InducedCovariance(Sigma=Sigma, n_traits=params.s)


def trait_reflectance_correlation(params: Parameters, bases: BasisSet) -> np.ndarray:
    """Residual trait/reflectance correlation curves, one row per trait (s, W)."""
    _require_spd(params.Omega)
    O_T, O_TR, O_R = params.omega_blocks()
    sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
    num = O_TR @ bases.K_U.T
    refl_var = np.einsum("wi,ij,wj->w", bases.K_U, O_R, bases.K_U) + sigma2
    denom = np.sqrt(np.outer(np.diag(O_T), refl_var))
    return num / denom


def simulate_dataset(
    params: Parameters,
    E: np.ndarray,
    bases: BasisSet,
    seed: int,
    site_ids: np.ndarray | None = None,
    trait_names: tuple[str, ...] = (),
    covariate_names: tuple[str, ...] = (),
) -> Dataset:
    """Draw a dataset from the generative model; deterministic given the seed."""
    E = np.asarray(E, dtype=float)
    n = E.shape[0]
    s = params.s
    rng = np.random.default_rng(seed)
    L = _require_spd(params.Omega)
    sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
    U = rng.standard_normal((n, params.Omega.shape[0])) @ L.T
    psi = rng.standard_normal((n, bases.grid.n_points)) * np.sqrt(sigma2)[None, :]
    T = params.alpha_T[None, :] + E @ params.B_T.T + U[:, :s]
    R = reflectance_fixed_effects(params, bases, E) + U[:, s:] @ bases.K_U.T + psi
    if site_ids is None:
        site_ids = np.array([f"sim{i + 1:04d}" for i in range(n)])
    return Dataset(
        E=E,
        T=T,
        R=R,
        grid=bases.grid,
        site_ids=site_ids,
        trait_names=trait_names,
        covariate_names=covariate_names,
    )


def _normal_logpdf_sum(x: np.ndarray, variance) -> float:
    x = np.asarray(x, dtype=float)
    variance = np.broadcast_to(np.asarray(variance, dtype=float), x.shape)
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * variance) + x * x / variance))


def log_joint_density(
    params: Parameters,
    data: Dataset,
    bases: BasisSet,
    priors: PriorConfig | None = None,
) -> float:
    """Unnormalized-in-data, fully normalized-in-parameters joint log density.

    Combines the latent-vector likelihood (trait residuals stacked with the
    reflectance random effects), the wavelength-specific pure-error
    likelihood, and every prior term. The trait block of ``U`` is recomputed
    from the trait residual identity, so the density is a well-defined
    function of the regression parameters. Invalid states (non-positive
    variances, non-SPD covariance, overflowing log variance) return -inf.
    """
    if priors is None:
        priors = PriorConfig()
    s = data.s
    if params.sigma2_alpha <= 0 or np.any(params.sigma2_beta <= 0):
        return -np.inf
    if not np.allclose(params.Omega, params.Omega.T, atol=1e-8):
        return -np.inf
    try:
        L_omega = np.linalg.cholesky(params.Omega)
    except np.linalg.LinAlgError:
        return -np.inf
    try:
        sigma2 = wavelength_variance(params.gamma_sigma, bases.K_sigma)
    except OverflowError:
        return -np.inf

    n = data.n
    d = params.Omega.shape[0]
    U = np.hstack([trait_residuals(params, data.E, data.T), params.U[:, s:]])

    # latent rows (trait residuals joint with reflectance random effects)
    half_logdet = float(np.sum(np.log(np.diag(L_omega))))
    V = solve_triangular(L_omega, U.T, lower=True, check_finite=False)
    total = -0.5 * float(np.sum(V * V)) - n * half_logdet - 0.5 * n * d * _LOG_2PI

    # wavelength-specific pure errors
    resid = data.R - reflectance_fixed_effects(params, bases, data.E) - params.U[:, s:] @ bases.K_U.T
    ss_w = np.sum(resid * resid, axis=0)
    total += -0.5 * float(n * np.sum(np.log(2.0 * np.pi * sigma2)) + np.sum(ss_w / sigma2))

    # priors
    total += _normal_logpdf_sum(params.alpha_star_R[:1], priors.var_alpha_star_intercept)
    total += _normal_logpdf_sum(params.alpha_star_R[1:], params.sigma2_alpha)
    total += _normal_logpdf_sum(params.B_R[:, 0], priors.var_b_r_intercept)
    if params.B_R.shape[1] > 1:
        total += _normal_logpdf_sum(
            params.B_R[:, 1:], params.sigma2_beta[:, None]
        )
    total += _normal_logpdf_sum(params.alpha_T, priors.var_alpha_t)
    total += _normal_logpdf_sum(params.B_T, priors.var_b_t)
    total += _normal_logpdf_sum(params.gamma_sigma[:1], priors.var_gamma_intercept)
    total += _normal_logpdf_sum(params.gamma_sigma[1:], priors.var_gamma)

    df = params.n_u + s + priors.wishart_df_offset
    omega_inv = cho_solve((L_omega, True), np.eye(d), check_finite=False)
    omega_inv = 0.5 * (omega_inv + omega_inv.T)
    total += float(
        stats.wishart.logpdf(omega_inv, df=df, scale=np.eye(d) / priors.wishart_rate)
    )

    gamma_scale = 1.0 / priors.gamma_rate
    total += float(
        stats.gamma.logpdf(1.0 / params.sigma2_alpha, a=priors.gamma_shape, scale=gamma_scale)
    )
    total += float(
        np.sum(stats.gamma.logpdf(1.0 / params.sigma2_beta, a=priors.gamma_shape, scale=gamma_scale))
    )
    return total


_PARAM_BLOCKS = (
    "alpha_T",
    "B_T",
    "alpha_star_R",
    "B_R",
    "gamma_sigma",
    "Omega",
    "sigma2_alpha",
    "sigma2_beta",
    "U",
)


def params_to_rows(params: Parameters) -> list[tuple[str, int, float]]:
    """Flatten a state to (name, flat_index, value) rows in a fixed block order."""
    rows = []
    for name in _PARAM_BLOCKS:
        block = getattr(params, name)
        if block is None:
            continue
        flat = np.atleast_1d(np.asarray(block, dtype=float)).ravel()
        rows.extend((name, i, float(v)) for i, v in enumerate(flat))
    return rows


def params_from_rows(rows) -> Parameters:
    """Rebuild a state from flat rows; shapes are inferred from block lengths."""
    blocks: dict[str, dict[int, float]] = {}
    for name, index, value in rows:
        blocks.setdefault(name, {})[int(index)] = float(value)

    def vec(name):
        entries = blocks[name]
        out = np.empty(len(entries))
        for i, v in entries.items():
            out[i] = v
        return out

    missing = [b for b in _PARAM_BLOCKS[:-1] if b not in blocks]
    if missing:
        raise ValueError(f"missing parameter blocks: {missing}")
    alpha_T = vec("alpha_T")
    s = alpha_T.shape[0]
    B_T_flat = vec("B_T")
    if B_T_flat.size % s:
        raise ValueError("B_T length is not a multiple of the trait count")
    p = B_T_flat.size // s
    B_R_flat = vec("B_R")
    if B_R_flat.size % p:
        raise ValueError("B_R length is not a multiple of the covariate count")
    omega_flat = vec("Omega")
    dim = int(round(math.sqrt(omega_flat.size)))
    if dim * dim != omega_flat.size:
        raise ValueError("Omega length is not a perfect square")
    U = None
    if "U" in blocks:
        u_flat = vec("U")
        if u_flat.size % dim:
            raise ValueError("U length is not a multiple of the latent dimension")
        U = u_flat.reshape(u_flat.size // dim, dim)
    return Parameters(
        alpha_T=alpha_T,
        B_T=B_T_flat.reshape(s, p),
        alpha_star_R=vec("alpha_star_R"),
        B_R=B_R_flat.reshape(p, B_R_flat.size // p),
        gamma_sigma=vec("gamma_sigma"),
        Omega=omega_flat.reshape(dim, dim),
        sigma2_alpha=float(vec("sigma2_alpha")[0]),
        sigma2_beta=vec("sigma2_beta"),
        U=U,
    )
