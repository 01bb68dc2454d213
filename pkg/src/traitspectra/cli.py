"""Operator commands: prepare, simulate, fit, predict, cv, report.

Ties ingestion, fitting, prediction, cross-validation, and reporting
together around a flat key = value config file. All transforms applied at
preparation time are recorded in the dataset manifest so prediction-time
inputs receive identical preprocessing. Outputs are plot-ready CSV tables;
every command is deterministic given its inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .bases import WavelengthGrid, build_bases
from .evaluate import compare_variants
from .geo import abundance_pipeline
from .model import (
    CovariateTransform,
    Dataset,
    params_from_rows,
    params_to_rows,
    simulate_dataset,
    standardize_covariates,
)
from .predict import PartialSite, predict_R_given_traits, predict_traits_given_R, summarize_posterior
from .sampler import SamplerConfig, load_store, run_chain, save_store

__all__ = [
    "ConfigError",
    "SchemaError",
    "DataError",
    "RunConfig",
    "parse_config",
    "write_dataset",
    "load_dataset",
    "cmd_prepare",
    "cmd_simulate",
    "cmd_fit",
    "cmd_predict",
    "cmd_cv",
    "cmd_report",
    "main",
]

logger = logging.getLogger(__name__)

CANONICAL_TRAITS = ("lwc", "lma", "pn", "ls")
CANONICAL_COVARIATES = ("elev", "gmap", "rfl_conc", "tmin_jan")


class ConfigError(ValueError):
    """Bad or missing configuration."""


class SchemaError(ValueError):
    """An input file does not match its declared schema."""


class DataError(ValueError):
    """Input values violate a data contract."""


@dataclass
class RunConfig:
    """Everything a command needs, merged from the config file and flags."""

    traits_csv: str = ""
    spectra_csv: str = ""
    env_csv: str = ""
    cover_csv: str = ""
    dataset_dir: str = ""
    store_dir: str = ""
    output_dir: str = "."
    sites_csv: str = ""
    truth_params: str = ""
    family: str = ""
    covariates: tuple = CANONICAL_COVARIATES
    variant: str = "joint"
    seed: int = 0
    iterations: int = 200_000
    burnin: int = 100_000
    keep: int = 5_000
    rw_scale: float = 0.1
    cv_folds: int = 10
    cv_iterations: int = 20_000
    cv_burnin: int = 10_000
    cv_keep: int = 500
    sim_n: int = 150
    grid_start: float = 450.0
    grid_stop: float = 949.0
    grid_step: float = 1.0
    alpha_spacing: float = 10.0
    u_spacing: float = 25.0
    beta_spacing: float = 100.0
    sigma_spacing: float = 50.0
    prior_var_alpha_star_intercept: float = 1e3
    prior_var_b_r_intercept: float = 1e3
    prior_var_alpha_t: float = 1e3
    prior_var_b_t: float = 1e3
    prior_var_gamma_intercept: float = 1e4
    prior_var_gamma: float = 9.0
    prior_wishart_rate: float = 1e-3
    prior_wishart_df_offset: float = 1.0
    prior_gamma_shape: float = 1.0
    prior_gamma_rate: float = 1.0

    def priors(self):
        from .model import PriorConfig

        return PriorConfig(
            var_alpha_star_intercept=self.prior_var_alpha_star_intercept,
            var_b_r_intercept=self.prior_var_b_r_intercept,
            var_alpha_t=self.prior_var_alpha_t,
            var_b_t=self.prior_var_b_t,
            var_gamma_intercept=self.prior_var_gamma_intercept,
            var_gamma=self.prior_var_gamma,
            wishart_rate=self.prior_wishart_rate,
            wishart_df_offset=self.prior_wishart_df_offset,
            gamma_shape=self.prior_gamma_shape,
            gamma_rate=self.prior_gamma_rate,
        )

    def grid(self) -> WavelengthGrid:
        return WavelengthGrid(
            np.arange(self.grid_start, self.grid_stop + self.grid_step / 2, self.grid_step)
        )

    def bases(self, grid: WavelengthGrid | None = None):
        return build_bases(
            grid if grid is not None else self.grid(),
            alpha_spacing=self.alpha_spacing,
            u_spacing=self.u_spacing,
            beta_spacing=self.beta_spacing,
            sigma_spacing=self.sigma_spacing,
        )

    def sampler_config(self, cv: bool = False) -> SamplerConfig:
        if cv:
            return SamplerConfig(
                n_iterations=self.cv_iterations,
                n_burnin=self.cv_burnin,
                n_keep=self.cv_keep,
                rw_scale=self.rw_scale,
                seed=self.seed,
            )
        return SamplerConfig(
            n_iterations=self.iterations,
            n_burnin=self.burnin,
            n_keep=self.keep,
            rw_scale=self.rw_scale,
            seed=self.seed,
        )


_INT_KEYS = {"seed", "iterations", "burnin", "keep", "cv_folds", "sim_n",
             "cv_iterations", "cv_burnin", "cv_keep"}
_FLOAT_KEYS = {"rw_scale", "grid_start", "grid_stop", "grid_step",
               "alpha_spacing", "u_spacing", "beta_spacing", "sigma_spacing",
               "prior_var_alpha_star_intercept", "prior_var_b_r_intercept",
               "prior_var_alpha_t", "prior_var_b_t", "prior_var_gamma_intercept",
               "prior_var_gamma", "prior_wishart_rate", "prior_wishart_df_offset",
               "prior_gamma_shape", "prior_gamma_rate"}


def parse_config(path) -> RunConfig:
    """Parse a flat ``key = value`` text file; '#' starts a comment."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "covariates":
            values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be a number") from None
        else:
            values[key] = value
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# dataset files


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_dataset(dataset: Dataset, transform: CovariateTransform, outdir, family: str = "") -> None:
    """Write the canonical dataset files plus the transform manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    species = dataset.species
    if species is None:
        species = np.array(["-"] * dataset.n)
    key_cols = list(zip(dataset.site_ids.tolist(), species.tolist()))

    _write_table(
        outdir / "env.csv",
        ["site_id", "species", *dataset.covariate_names],
        [
            [sid, sp, *map(_fmt, row)]
            for (sid, sp), row in zip(key_cols, dataset.E)
        ],
    )
    _write_table(
        outdir / "traits.csv",
        ["site_id", "species", *dataset.trait_names],
        [
            [sid, sp, *map(_fmt, row)]
            for (sid, sp), row in zip(key_cols, dataset.T)
        ],
    )
    wave_cols = [f"w{w:g}" for w in dataset.grid.values]
    _write_table(
        outdir / "spectra.csv",
        ["site_id", "species", *wave_cols],
        [
            [sid, sp, *map(_fmt, row)]
            for (sid, sp), row in zip(key_cols, dataset.R)
        ],
    )
    manifest = {
        "family": family,
        "n": dataset.n,
        "traits": list(dataset.trait_names),
        "covariates": list(dataset.covariate_names),
        "grid": [float(w) for w in dataset.grid.values],
        "standardization": {
            "means": [float(v) for v in transform.means],
            "scales": [float(v) for v in transform.scales],
        },
        "log_traits": True,
        "log_reflectance": True,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_dataset(path):
    """Load a dataset directory; returns (Dataset, manifest)."""
    path = Path(path)
    if not (path / "manifest.json").exists():
        raise ConfigError(f"not a dataset directory: {path}")
    with open(path / "manifest.json") as fh:
        manifest = json.load(fh)

    def read(name, expect_cols):
        with open(path / name) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["site_id", "species"] or header[2:] != expect_cols:
                raise SchemaError(f"{name}: unexpected header")
            site_ids, species, data = [], [], []
            for row in reader:
                site_ids.append(row[0])
                species.append(row[1])
                data.append([float(v) for v in row[2:]])
        return np.array(site_ids), np.array(species), np.array(data)

    grid = WavelengthGrid(np.array(manifest["grid"]))
    wave_cols = [f"w{w:g}" for w in grid.values]
    sids, species, E = read("env.csv", manifest["covariates"])
    _, _, T = read("traits.csv", manifest["traits"])
    _, _, R = read("spectra.csv", wave_cols)
    dataset = Dataset(
        E=E,
        T=T,
        R=R,
        grid=grid,
        site_ids=sids,
        trait_names=tuple(manifest["traits"]),
        covariate_names=tuple(manifest["covariates"]),
        species=species,
    )
    return dataset, manifest


def _transform_from_manifest(manifest) -> CovariateTransform:
    std = manifest["standardization"]
    return CovariateTransform(
        means=np.array(std["means"]), scales=np.array(std["scales"])
    )


# ---------------------------------------------------------------------------
# raw ingestion


def _read_raw_csv(path, key_cols, value_cols=None):
    """Read a raw CSV with string keys and float values; returns
    (keys, value column names, float matrix). Schema problems name the row."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[: len(key_cols)] != list(key_cols):
            raise SchemaError(f"{path.name}: header must start with {','.join(key_cols)}")
        names = header[len(key_cols) :]
        if value_cols is not None and names != list(value_cols):
            raise SchemaError(
                f"{path.name}: expected value columns {','.join(value_cols)}"
            )
        keys, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path.name}: row {lineno} has {len(row)} fields")
            try:
                values.append([float(v) for v in row[len(key_cols) :]])
            except ValueError:
                raise SchemaError(
                    f"{path.name}: row {lineno} has a non-numeric value"
                ) from None
            keys.append(tuple(row[: len(key_cols)]))
    return keys, names, np.array(values)


def _average_duplicates(keys, values):
    """Average rows sharing a key; returns sorted unique keys and means."""
    order = {}
    for key in keys:
        order.setdefault(key, len(order))
    uniq = sorted(order)
    index = {k: i for i, k in enumerate(uniq)}
    sums = np.zeros((len(uniq), values.shape[1]))
    counts = np.zeros(len(uniq))
    for key, row in zip(keys, values):
        i = index[key]
        sums[i] += row
        counts[i] += 1
    return uniq, sums / counts[:, None]


def cmd_prepare(config: RunConfig) -> Path:
    """Ingest raw files into a canonical dataset directory.

    Duplicate species-site records are averaged on the raw scale, traits and
    reflectance are log-transformed (rows with nonpositive values are
    rejected and reported), the abundance covariate is kriged from cover
    records when present, and covariates are standardized.
    """
    for key in ("traits_csv", "spectra_csv", "env_csv"):
        if not getattr(config, key):
            raise ConfigError(f"prepare needs {key}")
    t_keys, t_names, t_vals = _read_raw_csv(
        config.traits_csv, ("site_id", "species"), CANONICAL_TRAITS
    )
    s_keys, wave_names, s_vals = _read_raw_csv(config.spectra_csv, ("site_id", "species"))
    if not all(name.startswith("w") for name in wave_names):
        raise SchemaError("spectra columns must be named w<wavelength>")
    try:
        grid = WavelengthGrid(np.array([float(name[1:]) for name in wave_names]))
    except ValueError as exc:
        raise SchemaError(f"bad wavelength columns: {exc}") from None

    def drop_nonpositive(keys, values, label):
        bad = ~np.all(values > 0.0, axis=1)
        if np.any(bad):
            rows = [i + 2 for i in np.where(bad)[0]]
            logger.warning("%s: dropped %d row(s) with nonpositive values: %s",
                           label, len(rows), rows[:10])
        keep = ~bad
        return [k for k, ok in zip(keys, keep) if ok], values[keep]

    t_keys, t_vals = drop_nonpositive(t_keys, t_vals, "traits")
    s_keys, s_vals = drop_nonpositive(s_keys, s_vals, "spectra")
    t_keys, t_vals = _average_duplicates(t_keys, t_vals)
    s_keys, s_vals = _average_duplicates(s_keys, s_vals)

    e_keys, e_names, e_vals = _read_raw_csv(config.env_csv, ("site_id",))
    expected_env = [*config.covariates, "x", "y"]
    if e_names != expected_env:
        raise SchemaError(f"env columns must be {','.join(expected_env)}")
    env = {k[0]: v for k, v in zip(e_keys, e_vals)}

    covariate_names = list(config.covariates)
    abundance = None
    if config.cover_csv:
        c_keys, _, c_vals = _read_raw_csv(
            config.cover_csv, ("site_id",), ("x", "y", "cover_percent")
        )
        if c_vals.shape[0] == 0:
            raise DataError("cover file has no records")
        site_xy = np.array([[env[sid][-2], env[sid][-1]] for sid in sorted(env)])
        est = abundance_pipeline(c_vals[:, :2], c_vals[:, 2], site_xy)
        abundance = dict(zip(sorted(env), est))
        covariate_names.append("abundance")

    t_index = {k: i for i, k in enumerate(t_keys)}
    replicates = [k for k in s_keys if k in t_index]
    if not replicates:
        raise DataError("no species-site records carry both traits and spectra")
    missing_env = sorted({k[0] for k in replicates} - set(env))
    if missing_env:
        raise DataError(f"sites missing from env file: {missing_env[:10]}")
    s_index = {k: i for i, k in enumerate(s_keys)}

    rows_T = np.log(np.stack([t_vals[t_index[k]] for k in replicates]))
    rows_R = np.log(np.stack([s_vals[s_index[k]] for k in replicates]))
    p = len(config.covariates)
    rows_E = np.stack([env[k[0]][:p] for k in replicates])
    if abundance is not None:
        rows_E = np.column_stack([rows_E, [abundance[k[0]] for k in replicates]])
    E_std, transform = standardize_covariates(rows_E)

    dataset = Dataset(
        E=E_std,
        T=rows_T,
        R=rows_R,
        grid=grid,
        site_ids=np.array([k[0] for k in replicates]),
        trait_names=tuple(t_names),
        covariate_names=tuple(covariate_names),
        species=np.array([k[1] for k in replicates]),
    )
    outdir = Path(config.dataset_dir or Path(config.output_dir) / "dataset")
    write_dataset(dataset, transform, outdir, family=config.family)
    print(f"prepared dataset with n={dataset.n} replicates at {outdir}")
    return outdir


def cmd_simulate(config: RunConfig) -> Path:
    """Simulate a dataset from a true-parameter file and write it plus the
    truth manifest used by recovery tests."""
    if not config.truth_params:
        raise ConfigError("simulate needs truth_params")
    truth_path = Path(config.truth_params)
    if not truth_path.exists():
        raise ConfigError(f"truth file not found: {truth_path}")
    rows = []
    with open(truth_path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["name", "index", "value"]:
            raise SchemaError("truth file header must be name,index,value")
        for row in reader:
            rows.append((row[0], int(row[1]), float(row[2])))
    try:
        truth = params_from_rows(rows)
    except ValueError as exc:
        raise DataError(f"invalid truth parameters: {exc}") from None

    grid = config.grid()
    bases = config.bases(grid)
    if truth.alpha_star_R.shape[0] != bases.n_alpha:
        raise DataError(
            f"truth has {truth.alpha_star_R.shape[0]} intercept coefficients, "
            f"bases have {bases.n_alpha}"
        )
    p = truth.B_T.shape[1]
    rng = np.random.default_rng(config.seed)
    E = rng.standard_normal((config.sim_n, p))
    covariate_names = tuple(
        config.covariates[:p]
        if len(config.covariates) >= p
        else [f"e{i + 1}" for i in range(p)]
    )
    dataset = simulate_dataset(
        truth, E, bases, seed=config.seed, covariate_names=covariate_names
    )
    outdir = Path(config.dataset_dir or Path(config.output_dir) / "dataset")
    transform = CovariateTransform(means=np.zeros(p), scales=np.ones(p))
    write_dataset(dataset, transform, outdir, family=config.family or "synthetic")
    _write_table(
        outdir / "truth.csv",
        ["name", "index", "value"],
        [[n, i, _fmt(v)] for n, i, v in params_to_rows(truth)],
    )
    print(f"simulated dataset with n={dataset.n} at {outdir}")
    return outdir


def cmd_fit(config: RunConfig) -> Path:
    """Run the sampler on a prepared dataset and persist the store."""
    if not config.dataset_dir:
        raise ConfigError("fit needs dataset_dir")
    dataset, manifest = load_dataset(config.dataset_dir)
    bases = config.bases(WavelengthGrid(np.array(manifest["grid"])))
    cfg = config.sampler_config()
    store = run_chain(dataset, bases, cfg, priors=config.priors(), variant=config.variant)
    store.extra = {
        "dataset_dir": str(config.dataset_dir),
        "basis": {
            "alpha_spacing": config.alpha_spacing,
            "u_spacing": config.u_spacing,
            "beta_spacing": config.beta_spacing,
            "sigma_spacing": config.sigma_spacing,
        },
    }
    outdir = Path(config.store_dir or Path(config.output_dir) / "store")
    save_store(store, outdir)
    rate = store.gamma_accepted / max(store.gamma_proposals, 1)
    print(
        f"retained {len(store)} states; log-variance proposal acceptance "
        f"{rate:.3f} overall, {store.post_burnin_accept_rate:.3f} after burn-in; "
        f"final proposal scale {store.final_rw_scale:.4g}"
    )
    return outdir


def _load_store_and_bases(config: RunConfig):
    if not config.store_dir:
        raise ConfigError("this command needs store_dir")
    store = load_store(config.store_dir)
    dataset_dir = config.dataset_dir or store.extra.get("dataset_dir", "")
    if not dataset_dir:
        raise ConfigError("no dataset_dir configured or recorded in the store")
    dataset, manifest = load_dataset(dataset_dir)
    spacings = store.extra.get("basis", {})
    grid = WavelengthGrid(np.array(manifest["grid"]))
    bases = build_bases(
        grid,
        alpha_spacing=spacings.get("alpha_spacing", config.alpha_spacing),
        u_spacing=spacings.get("u_spacing", config.u_spacing),
        beta_spacing=spacings.get("beta_spacing", config.beta_spacing),
        sigma_spacing=spacings.get("sigma_spacing", config.sigma_spacing),
    )
    return store, dataset, manifest, bases


def _read_partial_sites(path, manifest, grid):
    """Parse the partial-site CSV: covariates plus exactly one response block."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"sites file not found: {path}")
    covariates = manifest["covariates"]
    traits = manifest["traits"]
    wave_cols = [f"w{w:g}" for w in grid.values]
    transform = _transform_from_manifest(manifest)
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "site_id" or header[1 : 1 + len(covariates)] != covariates:
            raise SchemaError(
                f"sites header must start with site_id,{','.join(covariates)}"
            )
        rest = header[1 + len(covariates) :]
        if rest == list(traits):
            block = "traits"
        elif rest == wave_cols:
            block = "spectra"
        else:
            raise SchemaError(
                "sites file must carry exactly one response block: either the "
                "trait columns or the full wavelength block"
            )
        sites = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"sites row {lineno} has {len(row)} fields")
            raw_E = np.array([float(v) for v in row[1 : 1 + len(covariates)]])
            E = transform.apply(raw_E[None, :])[0]
            values = np.array([float(v) for v in row[1 + len(covariates) :]])
            if np.any(values <= 0):
                raise DataError(f"sites row {lineno}: nonpositive response value")
            if block == "traits":
                sites.append(PartialSite(row[0], E, T=np.log(values)))
            else:
                sites.append(PartialSite(row[0], E, R=np.log(values)))
    return sites, block


def cmd_predict(config: RunConfig, exp_scale: bool = False) -> Path:
    """Predict the missing response block for each partial site."""
    if not config.sites_csv:
        raise ConfigError("predict needs sites_csv")
    store, _, manifest, bases = _load_store_and_bases(config)
    sites, block = _read_partial_sites(config.sites_csv, manifest, bases.grid)
    rng = np.random.default_rng(config.seed)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    out_path = outdir / "predictions.csv"
    traits = manifest["traits"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "quantity", "index_or_wavelength", "mean", "q05", "q95"])
        for site in sites:
            if block == "spectra":
                pred = predict_traits_given_R(store, site, bases, rng=rng)
                labels = traits
                index = range(len(traits))
            else:
                pred = predict_R_given_traits(store, site, bases, rng=rng)
                labels = ["reflectance"] * bases.grid.n_points
                index = [f"{w:g}" for w in bases.grid.values]
            mean, q05, q95 = pred.mean, pred.q05, pred.q95
            if exp_scale:
                mean, q05, q95 = np.exp(mean), np.exp(q05), np.exp(q95)
            for lab, idx, m, lo, hi in zip(labels, index, mean, q05, q95):
                writer.writerow([site.site_id, lab, idx, _fmt(m), _fmt(lo), _fmt(hi)])
    print(f"wrote predictions for {len(sites)} site(s) to {out_path}")
    return out_path


def cmd_cv(config: RunConfig) -> Path:
    """Cross-validate both variants and emit the comparison table."""
    if not config.dataset_dir:
        raise ConfigError("cv needs dataset_dir")
    dataset, manifest = load_dataset(config.dataset_dir)
    bases = config.bases(WavelengthGrid(np.array(manifest["grid"])))
    cfg = config.sampler_config(cv=True)
    report = compare_variants(
        dataset, bases, cfg, k=config.cv_folds, seed=config.seed, priors=config.priors()
    )
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    report.to_csv(outdir / "cv_report.csv")
    text = report.to_text()
    (outdir / "cv_report.txt").write_text(text + "\n")
    print(text)
    return outdir / "cv_report.csv"


def cmd_report(config: RunConfig) -> Path:
    """Posterior summary tables: correlation curves, coefficient functions,
    and trait coefficients, each with mean, 90% interval, and a flag for
    intervals excluding zero."""
    store, dataset, manifest, bases = _load_store_and_bases(config)
    if len(store) == 0:
        raise DataError("posterior store is empty")
    summ = summarize_posterior(store, bases)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    traits = manifest["traits"]
    covariates = manifest["covariates"]
    waves = bases.grid.values

    rows = []
    sig = summ.correlation_significant()
    for t, name in enumerate(traits):
        for w, wave in enumerate(waves):
            rows.append(
                [name, f"{wave:g}", _fmt(summ.correlation_mean[t, w]),
                 _fmt(summ.correlation_q05[t, w]), _fmt(summ.correlation_q95[t, w]),
                 int(sig[t, w])]
            )
    _write_table(
        outdir / "correlation.csv",
        ["trait", "wavelength", "mean", "q05", "q95", "significant"],
        rows,
    )

    rows = []
    sig = summ.coef_curves_significant()
    for k, name in enumerate(covariates):
        for w, wave in enumerate(waves):
            rows.append(
                [name, f"{wave:g}", _fmt(summ.coef_curves_mean[k, w]),
                 _fmt(summ.coef_curves_q05[k, w]), _fmt(summ.coef_curves_q95[k, w]),
                 int(sig[k, w])]
            )
    _write_table(
        outdir / "coefficient_functions.csv",
        ["covariate", "wavelength", "mean", "q05", "q95", "significant"],
        rows,
    )

    rows = []
    sig = summ.trait_coef_significant()
    for t, tname in enumerate(traits):
        for k, cname in enumerate(covariates):
            rows.append(
                [tname, cname, _fmt(summ.trait_coef_mean[t, k]),
                 _fmt(summ.trait_coef_q05[t, k]), _fmt(summ.trait_coef_q95[t, k]),
                 int(sig[t, k])]
            )
    _write_table(
        outdir / "trait_coefficients.csv",
        ["trait", "covariate", "mean", "q05", "q95", "significant"],
        rows,
    )
    print(f"wrote report tables to {outdir}")
    return outdir


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traitspectra",
        description="joint trait/reflectance regression: prepare, simulate, fit, predict, cv, report",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("prepare", "simulate", "fit", "predict", "cv", "report"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="flat key = value config file")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--output", default=None, help="output directory")
        cmd.add_argument("--variant", choices=("joint", "independent"), default=None)
        cmd.add_argument("--iterations", type=int, default=None)
        cmd.add_argument("--burnin", type=int, default=None)
        cmd.add_argument("--keep", type=int, default=None)
        if name == "predict":
            cmd.add_argument("--sites", default=None, help="partial-site CSV")
            cmd.add_argument(
                "--exp", action="store_true",
                help="report predictions back-transformed from the log scale",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.output is not None:
            config.output_dir = args.output
        if args.variant is not None:
            config.variant = args.variant
        if args.iterations is not None:
            config.iterations = args.iterations
        if args.burnin is not None:
            config.burnin = args.burnin
        if args.keep is not None:
            config.keep = args.keep
        if getattr(args, "sites", None) is not None:
            config.sites_csv = args.sites

        if args.command == "prepare":
            cmd_prepare(config)
        elif args.command == "simulate":
            cmd_simulate(config)
        elif args.command == "fit":
            cmd_fit(config)
        elif args.command == "predict":
            cmd_predict(config, exp_scale=getattr(args, "exp", False))
        elif args.command == "cv":
            cmd_cv(config)
        elif args.command == "report":
            cmd_report(config)
    except (ConfigError, SchemaError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - one-line machine-parsable failure
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
