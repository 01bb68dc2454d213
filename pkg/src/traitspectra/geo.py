"""Abundance-covariate preprocessing: semivariograms and ordinary kriging.

Family abundance at a site is the aggregated percent cover of the family's
species there. Cover sites and analysis sites are not perfectly aligned, so
cover is interpolated by ordinary kriging on the log(x + 1) scale under an
exponential covariance model fitted to the empirical semivariogram, then
back-transformed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist, pdist, squareform

__all__ = [
    "VariogramModel",
    "empirical_semivariogram",
    "fit_exponential",
    "ordinary_kriging",
    "kriging_weights",
    "abundance_pipeline",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VariogramModel:
    """Exponential semivariogram gamma(d) = nugget + partial_sill * (1 - exp(-d / range))."""

    nugget: float
    partial_sill: float
    range_: float

    def __post_init__(self):
        if self.nugget < 0 or self.partial_sill < 0:
            raise ValueError("nugget and partial sill must be nonnegative")
        if self.range_ <= 0:
            raise ValueError("range must be positive")

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        return self.nugget + self.partial_sill * (1.0 - np.exp(-d / self.range_))

    def covariance(self, d):
        """Covariance of the smooth component; the nugget acts only at d = 0."""
        d = np.asarray(d, dtype=float)
        return self.partial_sill * np.exp(-d / self.range_)


def empirical_semivariogram(coords, values, n_bins: int = 15):
    """Classic binned estimator: half the mean squared difference per lag bin.

    Bins are equal width up to half the maximum pairwise distance; bins
    without pairs are dropped. Returns (bin centers, semivariances, counts).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    values = np.asarray(values, dtype=float)
    if coords.shape[0] != values.shape[0]:
        raise ValueError("coords and values disagree in length")
    if coords.shape[0] < 2:
        raise ValueError("need at least two points")
    dists = pdist(coords)
    sq_diff = pdist(values[:, None], metric="sqeuclidean")
    max_lag = dists.max() / 2.0
    if dists.max() <= 0:
        raise ValueError("all points are co-located")
    if not np.any(dists <= max_lag):
        # tiny configurations can have every pair beyond half range
        max_lag = dists.max()
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    which = np.digitize(dists, edges[1:], right=True)
    centers, gammas, counts = [], [], []
    for b in range(n_bins):
        mask = which == b
        m = int(mask.sum())
        if m == 0:
            continue
        centers.append(0.5 * (edges[b] + edges[b + 1]))
        gammas.append(0.5 * sq_diff[mask].mean())
        counts.append(m)
    return np.array(centers), np.array(gammas), np.array(counts)


def fit_exponential(centers, gammas, counts) -> VariogramModel:
    """Pair-count-weighted least squares fit with a multi-start range grid.

    A flat semivariogram degenerates to a nugget-only model.
    """
    centers = np.asarray(centers, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if centers.size < 3:
        raise ValueError("need at least three nonempty bins")
    scale = gammas.max()
    max_d = centers.max()
    if scale <= 0 or np.ptp(gammas) < 1e-12 * max(scale, 1.0):
        return VariogramModel(nugget=float(np.mean(gammas)), partial_sill=0.0, range_=max_d)
    weights = np.sqrt(counts)

    def residual(x):
        nugget, psill, rng_ = x
        model = nugget + psill * (1.0 - np.exp(-centers / rng_))
        return weights * (model - gammas)

    best = None
    for frac in (0.05, 0.15, 0.3, 0.6, 1.0, 2.0):
        x0 = np.array([0.1 * scale, 0.9 * scale, frac * max_d])
        try:
            sol = least_squares(
                residual,
                x0,
                bounds=([0.0, 0.0, 1e-8 * max_d], [np.inf, np.inf, 1e3 * max_d]),
            )
        except Exception:  # noqa: BLE001 - a start may fail, others can win
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise RuntimeError("variogram fit failed from every start")
    nugget, psill, rng_ = best.x
    return VariogramModel(nugget=float(nugget), partial_sill=float(psill), range_=float(rng_))


def _dedupe(coords, values):
    """Average values at duplicated coordinates (they make the system singular)."""
    uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
    if uniq.shape[0] == coords.shape[0]:
        return coords, values
    logger.info("averaging %d co-located observations", coords.shape[0] - uniq.shape[0])
    sums = np.zeros(uniq.shape[0])
    cnt = np.zeros(uniq.shape[0])
    np.add.at(sums, inverse, values)
    np.add.at(cnt, inverse, 1.0)
    return uniq, sums / cnt


def kriging_weights(coords, model: VariogramModel, target):
    """Ordinary-kriging weights and Lagrange multiplier for one target."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    target = np.asarray(target, dtype=float)
    m = coords.shape[0]
    if m == 1:
        return np.array([1.0]), 0.0
    K = model.covariance(squareform(pdist(coords)))
    K[np.diag_indices_from(K)] += model.nugget
    rhs_cov = model.covariance(cdist(coords, target[None, :])[:, 0])
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = K
    A[:m, m] = 1.0
    A[m, :m] = 1.0
    b = np.concatenate([rhs_cov, [1.0]])
    sol = np.linalg.solve(A, b)
    return sol[:m], float(sol[m])


def ordinary_kriging(coords, values, model: VariogramModel, targets) -> np.ndarray:
    """Best linear unbiased prediction at each target location.

    With a zero nugget the prediction interpolates the observations exactly;
    a degenerate all-zero model falls back to the sample mean.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    values = np.asarray(values, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if coords.shape[0] == 0:
        raise ValueError("need at least one observation")
    coords, values = _dedupe(coords, values)
    if coords.shape[0] == 1 or (model.partial_sill == 0.0 and model.nugget == 0.0):
        return np.full(targets.shape[0], values.mean())
    preds = np.empty(targets.shape[0])
    for i, target in enumerate(targets):
        w, _ = kriging_weights(coords, model, target)
        preds[i] = w @ values
    return preds


def abundance_pipeline(coords, cover, targets, n_bins: int = 15) -> np.ndarray:
    """Per-site aggregated cover -> log(x+1) -> variogram fit -> kriging ->
    back-transform, floored at zero.

    ``coords`` may repeat when several species share a site; their cover
    adds. The back-transform is the plain inverse without lognormal bias
    correction.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    cover = np.asarray(cover, dtype=float)
    if cover.size == 0:
        raise ValueError("no cover records")
    uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
    agg = np.zeros(uniq.shape[0])
    np.add.at(agg, inverse, cover)
    logged = np.log1p(agg)
    if uniq.shape[0] < 2 or np.ptp(logged) < 1e-12:
        preds = np.full(np.atleast_2d(targets).shape[0], logged.mean())
    else:
        centers, gammas, counts = empirical_semivariogram(uniq, logged, n_bins=n_bins)
        if centers.size >= 3:
            model = fit_exponential(centers, gammas, counts)
        else:
            model = VariogramModel(
                nugget=float(np.var(logged)), partial_sill=0.0, range_=1.0
            )
        preds = ordinary_kriging(uniq, logged, model, targets)
    return np.maximum(np.expm1(preds), 0.0)
