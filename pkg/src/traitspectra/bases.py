"""Low-rank basis matrices over a wavelength grid.

All functional terms in the joint trait/reflectance model (wavelength-varying
intercept, random effects, coefficient functions, and log-variance spline) are
represented through fixed design matrices built here: unnormalized Gaussian
kernels centered at evenly spaced knots, and a linear spline for the
log-variance curve. Every matrix carries a leading intercept column so the
wavelength-varying quantities have an overall centering.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WavelengthGrid",
    "KernelBasisSpec",
    "BasisSet",
    "gaussian_kernel_matrix",
    "linear_spline_matrix",
    "build_bases",
    "default_bases",
    "kernel_column_names",
    "spline_column_names",
    "write_basis_csv",
]

DEFAULT_GRID_START = 450.0
DEFAULT_GRID_STOP = 949.0


@dataclass(frozen=True, eq=False)
class WavelengthGrid:
    """Strictly increasing wavelengths (nm) at which spectra are observed."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("wavelength grid must be a nonempty 1-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("wavelength grid contains non-finite values")
        if np.any(np.diff(values) <= 0):
            raise ValueError("wavelength grid must be strictly increasing")
        object.__setattr__(self, "values", values)

    @classmethod
    def default(cls) -> "WavelengthGrid":
        """450..949 nm inclusive at 1 nm spacing (500 points)."""
        return cls(np.arange(DEFAULT_GRID_START, DEFAULT_GRID_STOP + 1.0))

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def start(self) -> float:
        return float(self.values[0])

    @property
    def stop(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class KernelBasisSpec:
    """Knot layout and bandwidth for one Gaussian-kernel basis.

    Knots run from ``knot_start`` to ``knot_end`` inclusive in steps of
    ``knot_spacing``. If ``bandwidth`` is None it defaults to 1.5 times the
    knot spacing, which pins the kernel range against the scale parameters
    that are learned for the coefficients.
    """

    knot_start: float
    knot_end: float
    knot_spacing: float
    bandwidth: float | None = None
    include_intercept: bool = True

    def __post_init__(self):
        if self.knot_spacing <= 0:
            raise ValueError("knot spacing must be positive")
        if self.knot_end < self.knot_start:
            raise ValueError("knot range is empty")
        if self.bandwidth is None:
            object.__setattr__(self, "bandwidth", 1.5 * self.knot_spacing)
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def knots(self) -> np.ndarray:
        n = int(round((self.knot_end - self.knot_start) / self.knot_spacing))
        return self.knot_start + self.knot_spacing * np.arange(n + 1)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """The four design matrices used by the joint model.

    ``K_alpha`` carries the wavelength-varying intercept, ``K_U`` the
    low-rank random effects, ``K_beta`` the wavelength-varying regression
    coefficients, and ``K_sigma`` the log-variance linear spline. Spec and
    knot metadata are retained for CSV export and reporting; they are None
    for hand-built toy sets.
    """

    K_alpha: np.ndarray
    K_U: np.ndarray
    K_beta: np.ndarray
    K_sigma: np.ndarray
    grid: WavelengthGrid
    alpha_spec: KernelBasisSpec | None = None
    u_spec: KernelBasisSpec | None = None
    beta_spec: KernelBasisSpec | None = None
    sigma_knots: np.ndarray | None = None

    @property
    def n_alpha(self) -> int:
        return self.K_alpha.shape[1]

    @property
    def n_u(self) -> int:
        return self.K_U.shape[1]

    @property
    def n_beta(self) -> int:
        return self.K_beta.shape[1]

    @property
    def n_sigma(self) -> int:
        return self.K_sigma.shape[1]


def gaussian_kernel_matrix(grid: WavelengthGrid, spec: KernelBasisSpec) -> np.ndarray:
    """Evaluate unnormalized Gaussian kernels exp(-d^2 / (2 h^2)) at the grid.

    Returns a (W, N) matrix with one column per knot, preceded by an
    all-ones intercept column when the spec asks for one. Entries lie in
    [0, 1] and each kernel column peaks at the grid point nearest its knot.
    """
    knots = spec.knots
    if knots.size == 0:
        raise ValueError("kernel spec produced no knots")
    if spec.bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    w = grid.values[:, None]
    dist = w - knots[None, :]
    kern = np.exp(-(dist * dist) / (2.0 * spec.bandwidth**2))
    if spec.include_intercept:
        return np.hstack([np.ones((grid.n_points, 1)), kern])
    return kern


def linear_spline_matrix(grid: WavelengthGrid, interior_knots: np.ndarray) -> np.ndarray:
    """Linear-spline design matrix: intercept, scaled ramp, and hinge columns.

    The ramp is (w - w_min) / (w_max - w_min + 1) and each hinge is
    (w - knot)_+ divided by the knot spacing, keeping all columns O(1) so a
    common prior scale is sensible for the non-intercept coefficients.
    """
    knots = np.asarray(interior_knots, dtype=float)
    if knots.ndim != 1 or knots.size == 0:
        raise ValueError("need at least one interior knot")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("interior knots must be strictly increasing")
    if knots[0] < grid.start or knots[-1] > grid.stop:
        raise ValueError("interior knots must lie inside the grid range")
    w = grid.values
    span = grid.stop - grid.start + 1.0
    if knots.size >= 2:
        scale = float(np.mean(np.diff(knots)))
    else:
        scale = span
    ramp = (w - grid.start) / span
    hinges = np.maximum(w[:, None] - knots[None, :], 0.0) / scale
    return np.column_stack([np.ones_like(w), ramp, hinges])


def _kernel_knot_end(grid: WavelengthGrid, spacing: float) -> float:
    # Knot ranges extend to the first knot at or beyond the grid end, so the
    # 1 nm default grid ending at 949 still gets a knot at 950.
    steps = math.ceil((grid.stop - grid.start) / spacing)
    return grid.start + spacing * steps


def build_bases(
    grid: WavelengthGrid,
    alpha_spacing: float = 10.0,
    u_spacing: float = 25.0,
    beta_spacing: float = 100.0,
    sigma_spacing: float = 50.0,
    bandwidth_factor: float = 1.5,
) -> BasisSet:
    """Construct all four basis matrices for a grid and knot spacings."""
    specs = {}
    for name, spacing in (("alpha", alpha_spacing), ("u", u_spacing), ("beta", beta_spacing)):
        specs[name] = KernelBasisSpec(
            knot_start=grid.start,
            knot_end=_kernel_knot_end(grid, spacing),
            knot_spacing=spacing,
            bandwidth=bandwidth_factor * spacing,
        )
    sigma_knots = np.arange(grid.start + sigma_spacing / 2.0, grid.stop, sigma_spacing)
    return BasisSet(
        K_alpha=gaussian_kernel_matrix(grid, specs["alpha"]),
        K_U=gaussian_kernel_matrix(grid, specs["u"]),
        K_beta=gaussian_kernel_matrix(grid, specs["beta"]),
        K_sigma=linear_spline_matrix(grid, sigma_knots),
        grid=grid,
        alpha_spec=specs["alpha"],
        u_spec=specs["u"],
        beta_spec=specs["beta"],
        sigma_knots=sigma_knots,
    )


def default_bases(grid: WavelengthGrid | None = None) -> BasisSet:
    """Default knot layouts: kernels every 10/25/100 nm, spline knots every 50 nm.

    On the default 450-949 nm grid this yields column counts (52, 22, 7, 12).
    A grid that does not cover 450-949 nm is allowed but warned about; the
    kernels extrapolate smoothly outside the knot range.
    """
    if grid is None:
        grid = WavelengthGrid.default()
    if grid.start > DEFAULT_GRID_START or grid.stop < DEFAULT_GRID_STOP:
        warnings.warn(
            "grid does not cover 450-949 nm; kernel bases extrapolate",
            stacklevel=2,
        )
    return build_bases(grid)


def kernel_column_names(spec: KernelBasisSpec) -> list[str]:
    names = [f"k{knot:g}" for knot in spec.knots]
    if spec.include_intercept:
        return ["intercept"] + names
    return names


def spline_column_names(interior_knots: np.ndarray) -> list[str]:
    return ["intercept", "linear"] + [f"h{knot:g}" for knot in np.asarray(interior_knots)]


def write_basis_csv(path, grid: WavelengthGrid, matrix: np.ndarray, column_names: list[str]) -> None:
    """Write a basis matrix as CSV with one row per wavelength."""
    if matrix.shape != (grid.n_points, len(column_names)):
        raise ValueError("matrix shape does not match grid and column names")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wavelength"] + list(column_names))
        for i, w in enumerate(grid.values):
            writer.writerow([f"{w:g}"] + [repr(float(v)) for v in matrix[i]])
