"""Command line: diagnose, fit, compare, predict, synth.

Every command writes its artifacts into --out along with manifest.json,
which records input digests, the settings in force, the seed and the
package version.  Given identical input bytes, settings and seed, every
artifact is reproduced byte for byte; set SOURCE_DATE_EPOCH to pin the
manifest timestamp as well.

Exit codes: 0 success, 1 usage or configuration, 2 input data,
3 spatial structure, 4 numerical failure.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    IngestError,
    LayoutError,
    ModelError,
    NumericalFailure,
    SpatialError,
)
from .gibbs import MIN_RETAINED_FOR_PREDICTION, ChainConfig
from .ingest import IngestConfig, load_dataset
from .model import Hyperpriors
from .pipeline import compare_models, diagnose, fit_model
from .spatial import WeightConfig
from .synthetic import generate, write_csvs
from . import report

log = logging.getLogger(__name__)


# --- settings file ---------------------------------------------------------

_INGEST_KEYS = ("target_time_index", "window_years", "covariate_aggregation",
                "covariates")
_HYPER_KEYS = ("ig_shape", "ig_rate", "irw_order", "covariate_link")
_WEIGHT_KEYS = ("exponent_a", "exponent_b")


def parse_config_file(path) -> dict[str, str]:
    """key=value lines; blank lines and # comments ignored."""
    raw: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        known = _INGEST_KEYS + _HYPER_KEYS + _WEIGHT_KEYS
        if key not in known:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}; known keys: {', '.join(known)}"
            )
        raw[key] = value
    return raw


def _conv(raw: dict[str, str], key: str, to, default):
    if key not in raw:
        return default
    try:
        return to(raw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key}={raw[key]!r}: {exc}") from None


def build_settings(raw: dict[str, str]) -> tuple[IngestConfig, Hyperpriors, WeightConfig]:
    window_start = window_end = None
    if "window_years" in raw:
        parts = raw["window_years"].split(":")
        if len(parts) != 2:
            raise ConfigError(
                f"window_years must look like 2018:2020, got {raw['window_years']!r}"
            )
        try:
            window_start, window_end = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(
                f"window_years must hold two integers, got {raw['window_years']!r}"
            ) from None
        if window_start > window_end:
            raise ConfigError(
                f"window_years start {window_start} is after end {window_end}"
            )
    covariates = None
    if "covariates" in raw:
        covariates = tuple(c.strip() for c in raw["covariates"].split(",") if c.strip())
        if not covariates:
            raise ConfigError("covariates key given but names are empty")
    ingest = IngestConfig(
        target_time_index=_conv(raw, "target_time_index", int, None),
        window_start=window_start,
        window_end=window_end,
        covariate_aggregation=raw.get("covariate_aggregation", "mean"),
        covariates=covariates,
    )
    hyper = Hyperpriors(
        ig_shape=_conv(raw, "ig_shape", float, 0.025),
        ig_rate=_conv(raw, "ig_rate", float, 0.025),
        irw_order=_conv(raw, "irw_order", int, 1),
        covariate_link=raw.get("covariate_link", "linear"),
    )
    weights = WeightConfig(
        exponent_a=_conv(raw, "exponent_a", float, 1.0),
        exponent_b=_conv(raw, "exponent_b", float, 1.0),
    )
    return ingest, hyper, weights


# --- deterministic output helpers ------------------------------------------


def _jsonify(obj):
    """Recursively make obj JSON-safe; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):  # before int: bool subclasses int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


def _write_json(path: Path, obj) -> Path:
    return _write_text(path, json.dumps(_jsonify(obj), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, frame: pd.DataFrame) -> Path:
    return _write_text(path, frame.to_csv(index=False))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.replace(microsecond=0).isoformat()


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("coverr")
    except Exception:
        return "unknown"


def write_manifest(out_dir: Path, command: str, obj: dict, inputs: dict[str, str],
                   artifacts: dict[str, Path], parameters: dict,
                   notes=()) -> Path:
    manifest = {
        "command": command,
        "version": _version(),
        "seed": obj["seed"],
        "generated_at": _timestamp(),
        "settings": obj["raw_config"],
        "parameters": parameters,
        "inputs": {
            name: {"path": str(p), "sha256": _sha256(Path(p))}
            for name, p in inputs.items()
        },
        "outputs": {
            name: {"path": path.name, "sha256": _sha256(path)}
            for name, path in sorted(artifacts.items())
        },
        "notes": list(notes),
    }
    return _write_json(out_dir / "manifest.json", manifest)


# --- shared command plumbing -------------------------------------------------

_DATA_ARGS = ("areas", "estimates", "covariates", "adjacency")


def data_arguments(f):
    for name in reversed(_DATA_ARGS):
        f = click.argument(name, type=click.Path(dir_okay=False))(f)
    return f


def chain_options(f):
    f = click.option("--iters", "--iterations", "iterations", default=6000,
                     show_default=True, type=int, help="Gibbs scans per chain.")(f)
    f = click.option("--burnin", "--burn-in", "burn_in", default=1000,
                     show_default=True, type=int,
                     help="Scans discarded from the front.")(f)
    f = click.option("--thin", default=1, show_default=True, type=int,
                     help="Keep every thin-th scan after burn-in.")(f)
    f = click.option("--chains", "n_chains", default=1, show_default=True,
                     type=int, help="Independent chains.")(f)
    f = click.option("--rho-grid", "rho_grid_size", default=201, show_default=True,
                     type=int, help="Grid points for the spatial dependence draw.")(f)
    f = click.option("--seed", "seed_override", default=None, type=int,
                     help="Override the group-level seed for this run.")(f)
    return f


def _apply_seed(obj, seed_override) -> None:
    if seed_override is not None:
        obj["seed"] = seed_override


def _chain_config(obj, iterations, burn_in, thin, n_chains, rho_grid_size,
                  needs_prediction=True) -> ChainConfig:
    cfg = ChainConfig(iterations=iterations, burn_in=burn_in, thin=thin,
                      seed=obj["seed"], n_chains=n_chains,
                      rho_grid_size=rho_grid_size)
    if needs_prediction and cfg.n_retained_per_chain < MIN_RETAINED_FOR_PREDICTION:
        raise ConfigError(
            f"these settings retain {cfg.n_retained_per_chain} draws per chain; "
            f"prediction needs at least {MIN_RETAINED_FOR_PREDICTION}"
        )
    return cfg


def _load(obj, areas, estimates, covariates, adjacency):
    return load_dataset(areas, estimates, covariates, adjacency, obj["ingest"])


def _weights_audit(system) -> pd.DataFrame:
    rows = [
        {"area_id": aid, "row_sum": system.row_sums[k], "status": "kept", "reason": ""}
        for k, aid in enumerate(system.kept_ids)
    ]
    rows += [
        {"area_id": aid, "row_sum": np.nan, "status": "pruned", "reason": reason}
        for aid, reason in system.pruned
    ]
    return pd.DataFrame(rows).sort_values("area_id", ignore_index=True)


def _dropped_notes(dataset) -> list[str]:
    return [f"dropped {aid} at ingestion: {reason}" for aid, reason in dataset.dropped]


def _scalar_summary(draws) -> dict:
    def stats(pooled):
        return {
            "mean": float(pooled.mean()),
            "sd": float(pooled.std(ddof=1)) if pooled.size > 1 else None,
            "q025": float(np.quantile(pooled, 0.025)),
            "q975": float(np.quantile(pooled, 0.975)),
        }

    out = {name: stats(arr.reshape(-1)) for name, arr in draws.scalar_blocks().items()}
    if draws.lam is not None:
        pooled = draws.pooled("lam")
        out["lam"] = {gid: stats(pooled[:, j]) for j, gid in enumerate(draws.large_ids)}
    if draws.beta_coef is not None and draws.covariate_names:
        pooled = draws.pooled("beta_coef")
        out["beta_coef"] = {
            nm: stats(pooled[:, j]) for j, nm in enumerate(draws.covariate_names)
        }
    if draws.gamma is not None:
        pooled = draws.pooled("gamma")
        out["gamma"] = {
            str(t): stats(pooled[:, j]) for j, t in enumerate(draws.time_indices)
        }
    return out


def _draws_frame(draws) -> pd.DataFrame:
    records = []
    for name, arr in draws.scalar_blocks().items():
        c_n, r_n = arr.shape
        records.append(pd.DataFrame({
            "chain": np.repeat(np.arange(c_n), r_n),
            "iter": np.tile(np.arange(r_n), c_n),
            "parameter": name,
            "value": arr.reshape(-1),
        }))
    return pd.concat(records, ignore_index=True)


def _fit_summary(fit) -> dict:
    from .selection import residual_summary

    draws = fit.draws
    pred = fit.predictions
    shrunk = (pred["posterior_sd"] < pred["design_sd"]).mean()
    return {
        "variant": draws.variant.id,
        "requested_variant": draws.requested_variant.id,
        "collapsed": draws.collapsed,
        "n_areas": len(draws.area_ids),
        "n_obs": int(draws.y.size),
        "large_areas": list(draws.large_ids),
        "time_indices": list(draws.time_indices),
        "target_time": draws.time_indices[draws.target_time_pos],
        "chain": asdict(draws.config),
        "posterior": _scalar_summary(draws),
        "areas": {
            row.area_id: {
                "theta_hat": row.theta_hat,
                "sd": row.posterior_sd,
                "ci_low": row.ci_low,
                "ci_high": row.ci_high,
            }
            for row in pred.itertuples()
        },
        "shrinkage_fraction": float(shrunk),
        "residual_summary": residual_summary(fit.residual_table),
        "score": {
            "dbar": fit.score.dbar,
            "p_d": fit.score.p_d,
            "dic": fit.score.dic,
            "lpml": fit.score.lpml,
            "cpo_unstable": fit.score.cpo_unstable,
        },
        "convergence": {
            "rows": [
                {"parameter": r.name, "rhat": r.rhat, "ess": r.ess}
                for r in fit.convergence.rows
            ],
            "flagged": list(fit.convergence.flagged),
        },
        "pruned": [list(p) for p in (fit.weight_system.pruned if fit.weight_system else ())],
    }


# --- commands ----------------------------------------------------------------


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--out", "out_dir", default="coverr_out", show_default=True,
              type=click.Path(file_okay=False), help="Directory for artifacts.")
@click.option("--config", "config_path", default=None,
              type=click.Path(dir_okay=False),
              help="key=value settings file (ingestion window, priors, kernel).")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed for every stochastic step.")
@click.option("--verbose", is_flag=True, help="Chatty logging.")
@click.pass_context
def cli(ctx, out_dir, config_path, seed, verbose):
    """Small-area coverage-error modeling from direct survey estimates."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    raw = {}
    if config_path is not None:
        if not Path(config_path).exists():
            raise IngestError(f"settings file not found: {config_path}")
        raw = parse_config_file(config_path)
    ingest, hyper, weights = build_settings(raw)
    ctx.obj = {
        "out": Path(out_dir),
        "seed": seed,
        "raw_config": raw,
        "ingest": ingest,
        "hyper": hyper,
        "weights": weights,
    }


@cli.command("diagnose")
@data_arguments
@click.pass_obj
def diagnose_cmd(obj, areas, estimates, covariates, adjacency):
    """Spatial diagnostics: weight audit, Moran's I, variogram clouds."""
    dataset = _load(obj, areas, estimates, covariates, adjacency)
    diag = diagnose(dataset, obj["weights"])
    out = obj["out"]
    out.mkdir(parents=True, exist_ok=True)

    artifacts = {}
    artifacts["moran.json"] = _write_json(out / "moran.json", {
        "n_areas": diag.dataset.m,
        "I": diag.moran.I,
        "expected": diag.moran.expected_I,
        "sd": diag.moran.sd_I,
        "p": diag.moran.p_value,
    })
    cloud_frames = [
        pd.DataFrame({"d": c.points[:, 0], "sqdiff": c.points[:, 1],
                      "subset": label})
        for label, c in diag.clouds.items()
    ]
    artifacts["variogram.csv"] = _write_csv(
        out / "variogram.csv", pd.concat(cloud_frames, ignore_index=True)
    )
    artifacts["weights_audit.csv"] = _write_csv(
        out / "weights_audit.csv", _weights_audit(diag.system)
    )
    artifacts["variogram.png"] = report.variogram_figure(diag.clouds, out / "variogram.png")
    notes = list(diag.notes) + _dropped_notes(dataset)
    write_manifest(out, "diagnose", obj,
                   inputs=dict(zip(_DATA_ARGS, (areas, estimates, covariates, adjacency))),
                   artifacts=artifacts, parameters={}, notes=notes)

    click.echo(f"areas kept: {diag.dataset.m} (pruned {len(diag.system.pruned)})")
    sd = "nan" if not np.isfinite(diag.moran.sd_I) else f"{diag.moran.sd_I:.6g}"
    pv = "nan" if not np.isfinite(diag.moran.p_value) else f"{diag.moran.p_value:.3g}"
    click.echo(
        f"Moran's I = {diag.moran.I:.6g} (expected {diag.moran.expected_I:.6g}, "
        f"sd {sd}, p {pv})"
    )
    for note in notes:
        click.echo(f"note: {note}", err=True)
    click.echo(f"wrote {len(artifacts) + 1} files to {out}")


_RESIDUAL_COLUMNS = ["area_id", "y", "theta_hat", "sd", "std_residual", "time_index"]


@cli.command("fit")
@data_arguments
@click.option("--model", "--variant", "variant", default="V", show_default=True,
              help="Model variant id (I..VII).")
@chain_options
@click.pass_obj
def fit_cmd(obj, areas, estimates, covariates, adjacency, variant,
            iterations, burn_in, thin, n_chains, rho_grid_size, seed_override):
    """Fit one variant; write draws, predictions, summary and figures."""
    _apply_seed(obj, seed_override)
    cfg = _chain_config(obj, iterations, burn_in, thin, n_chains, rho_grid_size)
    dataset = _load(obj, areas, estimates, covariates, adjacency)
    fit = fit_model(dataset, variant, weight_config=obj["weights"],
                    hyperpriors=obj["hyper"], chain_config=cfg)
    out = obj["out"]
    out.mkdir(parents=True, exist_ok=True)

    artifacts = {
        "predictions.csv": _write_csv(out / "predictions.csv", fit.predictions),
        "draws.csv": _write_csv(out / "draws.csv", _draws_frame(fit.draws)),
        "residuals.csv": _write_csv(out / "residuals.csv",
                                    fit.residual_table[_RESIDUAL_COLUMNS]),
        "summary.json": _write_json(out / "summary.json", _fit_summary(fit)),
        "trace.png": report.trace_figure(fit.draws, out / "trace.png"),
        "shrinkage.png": report.shrinkage_figure(fit.predictions, out / "shrinkage.png"),
        "residuals.png": report.residual_figure(fit.residual_table, out / "residuals.png"),
    }
    if fit.weight_system is not None:
        artifacts["weights_audit.csv"] = _write_csv(
            out / "weights_audit.csv", _weights_audit(fit.weight_system)
        )
    notes = _dropped_notes(dataset)
    if fit.draws.collapsed:
        notes.append(
            f"variant {fit.draws.requested_variant.id} collapsed to "
            f"{fit.draws.variant.id}: single observed time point"
        )
    if fit.score.cpo_unstable:
        notes.append("harmonic-mean CPO flagged unstable; lpml is indicative only")
    write_manifest(out, "fit", obj,
                   inputs=dict(zip(_DATA_ARGS, (areas, estimates, covariates, adjacency))),
                   artifacts=artifacts,
                   parameters={"variant": fit.draws.variant.id, "chain": asdict(cfg)},
                   notes=notes)

    click.echo(f"variant {fit.draws.variant.id}: "
               f"DIC {fit.score.dic:.2f} (p_d {fit.score.p_d:.2f}), "
               f"LPML {fit.score.lpml:.2f}")
    if fit.convergence.flagged:
        click.echo(
            "convergence flags: " + ", ".join(fit.convergence.flagged), err=True
        )
    for note in notes:
        click.echo(f"note: {note}", err=True)
    click.echo(f"wrote {len(artifacts) + 1} files to {out}")


@cli.command("compare")
@data_arguments
@click.option("--variants", "--models", "variants",
              default="I,II,III,IV,V,VI,VII", show_default=True,
              help="Comma-separated variant ids to fit and rank.")
@chain_options
@click.pass_obj
def compare_cmd(obj, areas, estimates, covariates, adjacency, variants,
                iterations, burn_in, thin, n_chains, rho_grid_size, seed_override):
    """Fit several variants on the same pruned data and rank by DIC."""
    _apply_seed(obj, seed_override)
    requested = [v.strip() for v in variants.split(",") if v.strip()]
    if not requested:
        raise ConfigError("no variants given")
    cfg = _chain_config(obj, iterations, burn_in, thin, n_chains, rho_grid_size)
    dataset = _load(obj, areas, estimates, covariates, adjacency)
    comparison = compare_models(dataset, requested, weight_config=obj["weights"],
                                hyperpriors=obj["hyper"], chain_config=cfg)
    out = obj["out"]
    out.mkdir(parents=True, exist_ok=True)

    table = comparison.score_table()
    best = comparison.ranking.best_by_dic
    best_fit = comparison.fits[best]
    artifacts = {
        "model_scores.csv": _write_csv(out / "model_scores.csv", table),
        "scores.png": report.score_figure(table, out / "scores.png"),
        "predictions.csv": _write_csv(out / "predictions.csv", best_fit.predictions),
        "residuals.csv": _write_csv(out / "residuals.csv",
                                    best_fit.residual_table[_RESIDUAL_COLUMNS]),
        "summary.json": _write_json(out / "summary.json", {
            "ranking": list(comparison.ranking.order),
            "best_by_dic": best,
            "best_by_lpml": comparison.ranking.best_by_lpml,
            "near_tie": comparison.ranking.near_tie,
            "lpml_disagrees": comparison.ranking.lpml_disagrees,
            "models": {mid: _fit_summary(f) for mid, f in comparison.fits.items()},
        }),
    }
    notes = _dropped_notes(dataset)
    if comparison.ranking.near_tie:
        notes.append("top two DIC values are within the tie margin")
    if comparison.ranking.lpml_disagrees:
        notes.append(
            f"LPML prefers {comparison.ranking.best_by_lpml} over {best}"
        )
    write_manifest(out, "compare", obj,
                   inputs=dict(zip(_DATA_ARGS, (areas, estimates, covariates, adjacency))),
                   artifacts=artifacts,
                   parameters={"variants": requested, "chain": asdict(cfg)},
                   notes=notes)

    click.echo(table.to_string(index=False))
    click.echo(f"best by DIC: {best}" + (" (near tie)" if comparison.ranking.near_tie else ""))
    for note in notes:
        click.echo(f"note: {note}", err=True)
    click.echo(f"wrote {len(artifacts) + 1} files to {out}")


@cli.command("predict")
@data_arguments
@click.option("--model", "--variant", "variant", default="V", show_default=True,
              help="Model variant id (I..VII).")
@chain_options
@click.pass_obj
def predict_cmd(obj, areas, estimates, covariates, adjacency, variant,
                iterations, burn_in, thin, n_chains, rho_grid_size, seed_override):
    """Fit one variant and write just the prediction table and figure."""
    _apply_seed(obj, seed_override)
    cfg = _chain_config(obj, iterations, burn_in, thin, n_chains, rho_grid_size)
    dataset = _load(obj, areas, estimates, covariates, adjacency)
    fit = fit_model(dataset, variant, weight_config=obj["weights"],
                    hyperpriors=obj["hyper"], chain_config=cfg)
    out = obj["out"]
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {
        "predictions.csv": _write_csv(out / "predictions.csv", fit.predictions),
        "shrinkage.png": report.shrinkage_figure(fit.predictions, out / "shrinkage.png"),
    }
    write_manifest(out, "predict", obj,
                   inputs=dict(zip(_DATA_ARGS, (areas, estimates, covariates, adjacency))),
                   artifacts=artifacts,
                   parameters={"variant": fit.draws.variant.id, "chain": asdict(cfg)})
    click.echo(f"wrote predictions for {len(fit.predictions)} areas to {out}")


@cli.command("synth")
@click.option("--rows", default=10, show_default=True, type=int)
@click.option("--cols", default=10, show_default=True, type=int)
@click.option("--large", "n_large", default=4, show_default=True, type=int,
              help="Number of large areas (vertical bands of the grid).")
@click.option("--times", "n_times", default=1, show_default=True, type=int)
@click.option("--n-covariates", default=2, show_default=True, type=int)
@click.option("--model", "--variant", "variant", default="V", show_default=True)
@click.option("--seed", "seed_override", default=None, type=int,
              help="Override the group-level seed for this run.")
@click.option("--mu", default=2.0, show_default=True, type=float)
@click.option("--lam-sd", default=0.5, show_default=True, type=float)
@click.option("--tau2", default=0.25, show_default=True, type=float)
@click.option("--sigma2-gamma", default=0.1, show_default=True, type=float)
@click.option("--sigma2-u", default=0.5, show_default=True, type=float)
@click.option("--rho", default=0.8, show_default=True, type=float)
@click.option("--sigma2-delta", default=0.05, show_default=True, type=float)
@click.option("--design-sd", default=1.0, show_default=True, type=float)
@click.option("--start-year", default=2018, show_default=True, type=int)
@click.option("--n-years", default=3, show_default=True, type=int)
@click.pass_obj
def synth_cmd(obj, rows, cols, n_large, n_times, n_covariates, variant,
              seed_override, mu, lam_sd, tau2, sigma2_gamma, sigma2_u, rho,
              sigma2_delta, design_sd, start_year, n_years):
    """Generate a synthetic study with known truth as loadable input files."""
    _apply_seed(obj, seed_override)
    truth = generate(rows, cols, n_large=n_large, n_times=n_times,
                     n_covariates=n_covariates, variant=variant, mu=mu,
                     lam_sd=lam_sd, tau2=tau2, sigma2_gamma=sigma2_gamma,
                     sigma2_u=sigma2_u, rho=rho, sigma2_delta=sigma2_delta,
                     design_sd=design_sd, seed=obj["seed"],
                     start_year=start_year, n_years=n_years)
    out = obj["out"]
    out.mkdir(parents=True, exist_ok=True)
    paths = write_csvs(truth, out)
    artifacts = {p.name: p for p in paths.values()}
    artifacts["field.png"] = report.field_figure(truth, out / "field.png")
    write_manifest(out, "synth", obj, inputs={}, artifacts=artifacts,
                   parameters={
                       "rows": rows, "cols": cols, "n_large": n_large,
                       "n_times": n_times, "n_covariates": n_covariates,
                       "variant": truth.variant.id, "mu": mu, "lam_sd": lam_sd,
                       "tau2": tau2, "sigma2_gamma": sigma2_gamma,
                       "sigma2_u": sigma2_u, "rho": rho,
                       "sigma2_delta": sigma2_delta, "design_sd": design_sd,
                       "start_year": start_year, "n_years": n_years,
                   })
    click.echo(f"generated {truth.dataset.m} areas x {n_times} time point(s) "
               f"under variant {truth.variant.id}")
    click.echo(f"wrote {len(artifacts) + 1} files to {out}")


def main(argv=None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (ConfigError, LayoutError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except IngestError as exc:
        click.echo(f"input error: {exc}", err=True)
        return 2
    except ModelError as exc:
        click.echo(f"input error: {exc}", err=True)
        return 2
    except SpatialError as exc:
        click.echo(f"spatial structure error: {exc}", err=True)
        return 3
    except NumericalFailure as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 4


if __name__ == "__main__":
    sys.exit(main())
