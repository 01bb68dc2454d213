"""Scoring, cross-validation, and joint-vs-independence model comparison.

Model comparison is based on conditional prediction: each fold holds out
the trait block for one tenth of the sites and the spectrum block for a
disjoint tenth, fits on the remaining complete cases, and predicts each
held-out block from the observed one. The energy score evaluates the full
predictive ensemble; pointwise accuracy is summarized by MAE and RMSE of
the predictive means.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import pdist

from .bases import BasisSet
from .model import Dataset, PriorConfig
from .predict import _predict_reflectance_samples, _predict_traits_samples
from .sampler import PosteriorStore, SamplerConfig, run_chain

__all__ = [
    "energy_score",
    "mae",
    "rmse",
    "FoldPlan",
    "make_fold_plan",
    "VariantScores",
    "ScoreReport",
    "run_cv",
    "fit_independent_variant",
    "compare_variants",
]


def energy_score(samples: np.ndarray, obs: np.ndarray) -> float:
    """Negatively oriented energy score of an ensemble against one outcome.

    ES = mean ||X_m - x|| - 0.5 * mean ||X_m - X_m'||, so smaller is better
    and a perfect point ensemble scores zero.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    obs = np.atleast_1d(np.asarray(obs, dtype=float))
    if samples.ndim != 2 or samples.shape[1] != obs.shape[0]:
        raise ValueError("samples and observation dimensions disagree")
    m = samples.shape[0]
    if m < 2:
        raise ValueError("need at least two ensemble members")
    to_obs = np.linalg.norm(samples - obs[None, :], axis=1).mean()
    spread = pdist(samples).sum() / (m * m)
    return float(to_obs - spread)


def mae(pred_means: np.ndarray, obs: np.ndarray) -> float:
    pred_means = np.asarray(pred_means, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred_means.shape != obs.shape:
        raise ValueError("prediction and observation shapes disagree")
    if pred_means.size == 0:
        raise ValueError("empty input")
    return float(np.mean(np.abs(pred_means - obs)))


def rmse(pred_means: np.ndarray, obs: np.ndarray) -> float:
    pred_means = np.asarray(pred_means, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred_means.shape != obs.shape:
        raise ValueError("prediction and observation shapes disagree")
    if pred_means.size == 0:
        raise ValueError("empty input")
    return float(np.sqrt(np.mean((pred_means - obs) ** 2)))


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Per-fold holdout sets: trait sites and spectrum sites, disjoint within
    a fold, each site held out exactly once per block across folds."""

    trait_folds: tuple
    spectrum_folds: tuple

    def __post_init__(self):
        n_trait = np.concatenate(self.trait_folds)
        n_spec = np.concatenate(self.spectrum_folds)
        if len(set(n_trait.tolist())) != n_trait.size:
            raise ValueError("a site appears in more than one trait fold")
        if len(set(n_spec.tolist())) != n_spec.size:
            raise ValueError("a site appears in more than one spectrum fold")
        if set(n_trait.tolist()) != set(n_spec.tolist()):
            raise ValueError("trait and spectrum folds cover different sites")
        for i, (t, r) in enumerate(zip(self.trait_folds, self.spectrum_folds)):
            if set(t.tolist()) & set(r.tolist()):
                raise ValueError(f"fold {i} holds out both blocks for one site")

    @property
    def k(self) -> int:
        return len(self.trait_folds)


def make_fold_plan(dataset: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Random fold assignment; the spectrum folds are the trait folds rotated
    by one so the within-fold holdout sets never overlap."""
    n = dataset.n
    if n < 2 * k:
        raise ValueError(f"need at least {2 * k} sites for {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    trait_folds = tuple(np.sort(perm[i::k]) for i in range(k))
    spectrum_folds = tuple(trait_folds[(i + 1) % k] for i in range(k))
    return FoldPlan(trait_folds=trait_folds, spectrum_folds=spectrum_folds)


@dataclass(eq=False)
class VariantScores:
    """Cross-validated scores for one model variant."""

    trait_mae: np.ndarray
    trait_rmse: np.ndarray
    trait_es: float
    spectrum_mae: float
    spectrum_rmse: float
    spectrum_es: float
    trait_es_by_fold: np.ndarray
    spectrum_es_by_fold: np.ndarray
    trait_es_by_site: np.ndarray
    spectrum_es_by_site: np.ndarray


@dataclass(eq=False)
class ScoreReport:
    """Comparison table holding one or more variants in a fixed row layout."""

    trait_names: tuple
    variants: dict = field(default_factory=dict)

    _MODEL_LABELS = {"independent": "[T|E][R|E]", "joint": "[T,R|E]"}

    def rows(self):
        """(quantity, model, MAE, RMSE, ES) rows; the trait block shares one
        energy score, printed on each trait row span's first entry."""
        out = []
        for variant in ("independent", "joint"):
            if variant not in self.variants:
                continue
            scores = self.variants[variant]
            label = self._MODEL_LABELS[variant]
            for i, name in enumerate(self.trait_names):
                es = scores.trait_es if i == 0 else ""
                out.append(
                    (f"log {name}", label, scores.trait_mae[i], scores.trait_rmse[i], es)
                )
            out.append(
                (
                    "log Reflectance",
                    label,
                    scores.spectrum_mae,
                    scores.spectrum_rmse,
                    scores.spectrum_es,
                )
            )
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["quantity", "model", "MAE", "RMSE", "ES"])
            for quantity, model, m, r, es in self.rows():
                writer.writerow(
                    [quantity, model, repr(float(m)), repr(float(r)),
                     "" if es == "" else repr(float(es))]
                )

    def to_text(self) -> str:
        header = ("quantity", "model", "MAE", "RMSE", "ES")
        body = [
            (q, m, f"{a:.3f}", f"{r:.3f}", "" if es == "" else f"{es:.3f}")
            for q, m, a, r, es in self.rows()
        ]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(5)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines.append("  ".join("-" * w for w in widths))
        for row in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        return "\n".join(lines)


def fit_independent_variant(
    dataset: Dataset,
    bases: BasisSet,
    config: SamplerConfig,
    priors: PriorConfig | None = None,
) -> PosteriorStore:
    """Fit with the trait/spectrum cross block pinned to zero: the latent
    covariance splits into two blocks with separate Wishart updates."""
    return run_chain(dataset, bases, config, priors=priors, variant="independent")


def run_cv(
    dataset: Dataset,
    bases: BasisSet,
    sampler_config: SamplerConfig,
    model_variant: str = "joint",
    fold_plan: FoldPlan | None = None,
    k: int = 10,
    seed: int = 0,
    priors: PriorConfig | None = None,
) -> ScoreReport:
    """K-fold conditional cross-validation for one model variant.

    Per fold: fit on the complete-case training sites, predict held-out
    traits from their observed spectra and held-out spectra from their
    observed traits. Scores are accumulated over all sites (each held out
    exactly once per block) and per fold.
    """
    if model_variant not in ("joint", "independent"):
        raise ValueError(f"unknown variant {model_variant!r}")
    if fold_plan is None:
        fold_plan = make_fold_plan(dataset, k=k, seed=seed)
    k = fold_plan.k
    n, s, W = dataset.n, dataset.s, dataset.n_wavelengths

    trait_pred_mean = np.full((n, s), np.nan)
    spec_pred_mean = np.full((n, W), np.nan)
    trait_es_site = np.full(n, np.nan)
    spec_es_site = np.full(n, np.nan)
    trait_es_fold = np.empty(k)
    spec_es_fold = np.empty(k)

    base_seed = np.random.SeedSequence(seed)
    fold_seeds = base_seed.spawn(k)
    for i in range(k):
        held_t = fold_plan.trait_folds[i]
        held_r = fold_plan.spectrum_folds[i]
        held = np.concatenate([held_t, held_r])
        train_idx = np.setdiff1d(np.arange(n), held)
        train = dataset.subset(train_idx)
        fit_seed, pred_seed = fold_seeds[i].spawn(2)
        cfg = replace(sampler_config, seed=int(fit_seed.generate_state(1)[0] % (1 << 31)))
        try:
            store = run_chain(train, bases, cfg, priors=priors, variant=model_variant)
        except Exception as exc:
            raise RuntimeError(f"fold {i} fit failed: {exc}") from exc
        rng = np.random.default_rng(pred_seed)

        t_samps = _predict_traits_samples(
            store, dataset.E[held_t], dataset.R[held_t], bases, rng
        )  # (M, |held_t|, s)
        trait_pred_mean[held_t] = t_samps.mean(axis=0)
        for j, site in enumerate(held_t):
            trait_es_site[site] = energy_score(t_samps[:, j, :], dataset.T[site])
        trait_es_fold[i] = trait_es_site[held_t].mean()

        r_samps = _predict_reflectance_samples(
            store, dataset.E[held_r], dataset.T[held_r], bases, rng
        )  # (M, |held_r|, W)
        spec_pred_mean[held_r] = r_samps.mean(axis=0)
        for j, site in enumerate(held_r):
            spec_es_site[site] = energy_score(r_samps[:, j, :], dataset.R[site])
        spec_es_fold[i] = spec_es_site[held_r].mean()

    trait_mae = np.abs(trait_pred_mean - dataset.T).mean(axis=0)
    trait_rmse = np.sqrt(((trait_pred_mean - dataset.T) ** 2).mean(axis=0))
    spec_err = spec_pred_mean - dataset.R
    spectrum_mae = float(np.abs(spec_err).mean())
    # per-wavelength RMSE averaged over wavelengths
    spectrum_rmse = float(np.sqrt((spec_err**2).mean(axis=0)).mean())

    scores = VariantScores(
        trait_mae=trait_mae,
        trait_rmse=trait_rmse,
        trait_es=float(trait_es_site.mean()),
        spectrum_mae=spectrum_mae,
        spectrum_rmse=spectrum_rmse,
        spectrum_es=float(spec_es_site.mean()),
        trait_es_by_fold=trait_es_fold,
        spectrum_es_by_fold=spec_es_fold,
        trait_es_by_site=trait_es_site,
        spectrum_es_by_site=spec_es_site,
    )
    report = ScoreReport(trait_names=dataset.trait_names)
    report.variants[model_variant] = scores
    return report


def compare_variants(
    dataset: Dataset,
    bases: BasisSet,
    sampler_config: SamplerConfig,
    k: int = 10,
    seed: int = 0,
    priors: PriorConfig | None = None,
) -> ScoreReport:
    """Run the cross-validation for both variants on a shared fold plan."""
    fold_plan = make_fold_plan(dataset, k=k, seed=seed)
    report = ScoreReport(trait_names=dataset.trait_names)
    for variant in ("independent", "joint"):
        one = run_cv(
            dataset,
            bases,
            sampler_config,
            model_variant=variant,
            fold_plan=fold_plan,
            seed=seed,
            priors=priors,
        )
        report.variants[variant] = one.variants[variant]
    return report
