"""End-to-end orchestration from a loaded dataset to scored fits.

The weight system is built once from the rates at the target time, the
dataset is restricted to the areas that survive pruning, and every
variant is fit on that same restricted data.  Holding the observation
set fixed is what makes the deviance-based scores comparable across
variants; a variant with no spatial term is still scored on the pruned
universe whenever spatial structure is available.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import pandas as pd

from .errors import DimensionMismatch, SpatialError
from .gibbs import (
    ChainConfig,
    ConvergenceReport,
    PosteriorDraws,
    convergence_report,
    predict,
    run_chain,
)
from .ingest import Dataset
from .model import Hyperpriors
from .selection import ModelScore, Ranking, rank_models, residuals, score_model
from .spatial import (
    MoranResult,
    VariogramCloud,
    WeightConfig,
    WeightSystem,
    build_weight_system,
    contiguity_matrix,
    distance_matrix,
    morans_i,
    variogram_cloud,
)

log = logging.getLogger(__name__)


def prepare_spatial(dataset: Dataset,
                    weight_config: WeightConfig | None = None
                    ) -> tuple[Dataset, WeightSystem]:
    """Build the weight system at the target time and prune the dataset."""
    cfg = weight_config or WeightConfig()
    rates = dataset.target_rates()
    dist = distance_matrix(dataset.areas)
    contig = contiguity_matrix(dataset.adjacency, dataset.area_ids, rates)
    system = build_weight_system(dist, contig, dataset.area_ids, cfg)
    if system.n < dataset.m:
        log.info("pruned %d of %d areas while building the weight system",
                 dataset.m - system.n, dataset.m)
        dataset = dataset.restrict(system.kept_ids)
    return dataset, system


@dataclass
class Diagnosis:
    """Exploratory spatial diagnostics at the target time."""

    dataset: Dataset                      # restricted to the kept areas
    system: WeightSystem
    moran: MoranResult
    clouds: dict[str, VariogramCloud]
    notes: tuple[str, ...]


def diagnose(dataset: Dataset,
             weight_config: WeightConfig | None = None) -> Diagnosis:
    """Moran's I on the row-standardized weights plus variogram clouds.

    Subsets too small to form pairs are skipped and noted rather than
    failing the whole diagnosis.
    """
    restricted, system = prepare_spatial(dataset, weight_config)
    rates_by_id = restricted.target_rates()
    rates = [rates_by_id[a] for a in restricted.area_ids]
    moran = morans_i(rates, system.w)

    dist = distance_matrix(restricted.areas)
    clouds: dict[str, VariogramCloud] = {}
    notes: list[str] = []
    for label in ("all", "undercount", "overcount"):
        try:
            clouds[label] = variogram_cloud(rates, dist, subset=label)
        except SpatialError as exc:
            notes.append(f"variogram subset {label!r} skipped: {exc}")
    for area_id, reason in system.pruned:
        notes.append(f"pruned {area_id}: {reason}")
    return Diagnosis(dataset=restricted, system=system, moran=moran,
                     clouds=clouds, notes=tuple(notes))


@dataclass
class FitResult:
    draws: PosteriorDraws
    predictions: pd.DataFrame
    score: ModelScore
    convergence: ConvergenceReport
    residual_table: pd.DataFrame
    weight_system: WeightSystem | None
    dataset: Dataset


def fit_model(dataset: Dataset, variant="V",
              weight_config: WeightConfig | None = None,
              hyperpriors: Hyperpriors | None = None,
              chain_config: ChainConfig | None = None,
              prepared: tuple[Dataset, WeightSystem] | None = None) -> FitResult:
    """Fit one variant and bundle predictions, score and convergence.

    prepared lets a caller reuse the (restricted dataset, weight system)
    pair across variants; otherwise it is built here.  When the dataset
    has no usable spatial structure, variants without a spatial term
    fall back to the unrestricted data with a warning instead of failing.
    """
    if prepared is not None:
        fit_dataset, system = prepared
    else:
        try:
            fit_dataset, system = prepare_spatial(dataset, weight_config)
        except (SpatialError, DimensionMismatch) as exc:
            from .model import ModelVariant

            v = ModelVariant.from_id(variant) if isinstance(variant, str) else variant
            if v.includes_space_smoother:
                raise
            warnings.warn(
                f"no usable spatial structure ({exc}); fitting variant "
                f"{v.id} on the unrestricted dataset",
                UserWarning,
                stacklevel=2,
            )
            fit_dataset, system = dataset, None

    draws = run_chain(fit_dataset, system, variant,
                      hyperpriors=hyperpriors, config=chain_config)
    return FitResult(
        draws=draws,
        predictions=predict(draws),
        score=score_model(draws),
        convergence=convergence_report(draws),
        residual_table=residuals(draws),
        weight_system=system,
        dataset=fit_dataset,
    )


@dataclass
class Comparison:
    fits: dict[str, FitResult]
    ranking: Ranking

    def score_table(self) -> pd.DataFrame:
        rows = []
        for model_id in self.ranking.order:
            s = self.fits[model_id].score
            flags = []
            if s.cpo_unstable:
                flags.append("cpo_unstable")
            if model_id == self.ranking.best_by_dic and self.ranking.near_tie:
                flags.append("near_tie")
            if model_id == self.ranking.best_by_lpml and self.ranking.lpml_disagrees:
                flags.append("lpml_prefers")
            rows.append({
                "variant": model_id,
                "dbar": s.dbar,
                "p_d": s.p_d,
                "dic": s.dic,
                "lpml": s.lpml,
                "flags": ";".join(flags),
            })
        return pd.DataFrame(rows)


def compare_models(dataset: Dataset, variants=("I", "II", "III", "IV", "V", "VI", "VII"),
                   weight_config: WeightConfig | None = None,
                   hyperpriors: Hyperpriors | None = None,
                   chain_config: ChainConfig | None = None) -> Comparison:
    """Fit several variants on one shared observation set and rank them."""
    variants = list(variants)
    if not variants:
        raise ValueError("no variants requested")
    try:
        prepared = prepare_spatial(dataset, weight_config)
    except (SpatialError, DimensionMismatch) as exc:
        from .model import ModelVariant

        needs_space = any(
            (ModelVariant.from_id(v) if isinstance(v, str) else v).includes_space_smoother
            for v in variants
        )
        if needs_space:
            raise
        warnings.warn(
            f"no usable spatial structure ({exc}); comparing on the "
            "unrestricted dataset",
            UserWarning,
            stacklevel=2,
        )
        prepared = (dataset, None)
    fits: dict[str, FitResult] = {}
    for v in variants:
        result = fit_model(dataset, v, hyperpriors=hyperpriors,
                           chain_config=chain_config, prepared=prepared)
        effective = result.draws.variant.id
        if effective in fits:
            # happens when a single observed time collapses two requested
            # variants onto the same effective one
            warnings.warn(
                f"variant {result.draws.requested_variant.id} collapsed onto "
                f"{effective}, which is already fit; skipping the duplicate",
                UserWarning,
                stacklevel=2,
            )
            continue
        fits[effective] = result
    ranking = rank_models([f.score for f in fits.values()])
    return Comparison(fits=fits, ranking=ranking)
