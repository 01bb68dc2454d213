"""Joint Bayesian regression of multivariate traits and reflectance spectra.

A trait vector and a functional log-reflectance spectrum are modeled jointly
on scalar environmental covariates. Low-rank kernel-convolution bases carry
the functional terms, shared latent random effects carry the residual
trait/spectrum dependence, and a blocked Gibbs sampler with a
Metropolis-within-Gibbs step for the log-variance spline fits the model.
Conditional cross-prediction and energy-score cross-validation compare the
joint specification against its independence restriction.
"""

from .bases import (
    BasisSet,
    KernelBasisSpec,
    WavelengthGrid,
    build_bases,
    default_bases,
    gaussian_kernel_matrix,
    linear_spline_matrix,
)
from .evaluate import (
    FoldPlan,
    ScoreReport,
    compare_variants,
    energy_score,
    fit_independent_variant,
    mae,
    make_fold_plan,
    rmse,
    run_cv,
)
from .geo import (
    VariogramModel,
    abundance_pipeline,
    empirical_semivariogram,
    fit_exponential,
    ordinary_kriging,
)
from .model import (
    CovariateTransform,
    Dataset,
    Parameters,
    PriorConfig,
    coefficient_functions,
    induced_sigma,
    log_joint_density,
    simulate_dataset,
    standardize_covariates,
    trait_reflectance_correlation,
    wavelength_variance,
)
from .predict import (
    PartialSite,
    PredictionSet,
    infer_latent_U_from_R,
    predict_R_given_traits,
    predict_traits_given_R,
    summarize_posterior,
)
from .sampler import (
    PosteriorStore,
    SamplerConfig,
    SamplerError,
    load_store,
    run_chain,
    save_store,
    wishart_rvs,
)

__version__ = "0.1.0"
