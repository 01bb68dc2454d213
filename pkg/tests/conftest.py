"""Shared toy-model builders for the test suite."""

import numpy as np
import pytest

from traitspectra.bases import BasisSet, WavelengthGrid, build_bases
from traitspectra.model import Parameters


def toy_grid(n_points=20, start=450.0, step=1.0):
    return WavelengthGrid(start + step * np.arange(n_points))


def toy_bases(n_points=20):
    """Small kernel bases over a short grid (counts: 5, 3, 2 knots + spline)."""
    grid = toy_grid(n_points)
    return build_bases(
        grid,
        alpha_spacing=max(n_points // 4, 2),
        u_spacing=max(n_points // 2, 3),
        beta_spacing=n_points,
        sigma_spacing=max(n_points // 2, 3),
    )


def intercept_bases(n_points=1):
    """All four design matrices reduced to a single intercept column."""
    grid = toy_grid(n_points)
    ones = np.ones((n_points, 1))
    return BasisSet(K_alpha=ones, K_U=ones, K_beta=ones, K_sigma=ones, grid=grid)


def random_spd(rng, dim, scale=1.0):
    A = rng.standard_normal((dim, dim))
    M = A @ A.T / dim + scale * np.eye(dim)
    return 0.5 * (M + M.T)


def random_params(rng, bases, s=2, p=2, n=None, omega_scale=1.0, gamma_scale=0.3):
    """A random valid state for the given bases; U is drawn when n is given."""
    n_u = bases.n_u
    params = Parameters(
        alpha_T=rng.standard_normal(s),
        B_T=rng.standard_normal((s, p)),
        alpha_star_R=rng.standard_normal(bases.n_alpha),
        B_R=rng.standard_normal((p, bases.n_beta)),
        gamma_sigma=gamma_scale * rng.standard_normal(bases.n_sigma),
        Omega=random_spd(rng, s + n_u, scale=omega_scale),
        sigma2_alpha=float(rng.uniform(0.5, 2.0)),
        sigma2_beta=rng.uniform(0.5, 2.0, size=p),
        U=None,
    )
    if n is not None:
        L = np.linalg.cholesky(params.Omega)
        params.U = rng.standard_normal((n, s + n_u)) @ L.T
    return params


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
