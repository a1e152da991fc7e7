"""Model comparison: deviance summaries, leave-one-out scores, residuals.

Scores are computed from the stored log-likelihood draws, so comparing
variants only requires that they were fit to the same observations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .errors import DimensionMismatch, UnstableCPO
from .gibbs import PosteriorDraws
from .ingest import Dataset

log = logging.getLogger(__name__)


def _check_dataset(draws: PosteriorDraws, dataset: Dataset | None) -> None:
    """Scores come from the stored draws; a dataset argument is accepted
    purely as a cross-check that the draws belong to it."""
    if dataset is None:
        return
    if (dataset.area_ids != draws.area_ids
            or dataset.n_obs != draws.y.size
            or not np.array_equal(dataset.y, draws.y)):
        raise DimensionMismatch(
            "draws were not produced from this dataset (area set or "
            "observed estimates differ)"
        )


@dataclass(frozen=True)
class DicResult:
    """Deviance information criterion pieces.

    dbar is the posterior mean deviance, d_at_mean the deviance at the
    posterior mean of theta, p_d their gap (effective parameters) and
    dic = dbar + p_d.  Smaller dic is better.
    """

    dbar: float
    d_at_mean: float
    p_d: float
    dic: float


@dataclass(frozen=True)
class CpoResult:
    """Per-observation conditional predictive ordinates (log scale) and
    their sum, the log pseudo marginal likelihood.  Larger lpml is better.
    """

    log_cpo: np.ndarray
    lpml: float


@dataclass(frozen=True)
class ModelScore:
    variant_id: str
    dbar: float
    d_at_mean: float
    p_d: float
    dic: float
    lpml: float
    log_cpo: np.ndarray | None = None
    cpo_unstable: bool = False


@dataclass(frozen=True)
class Ranking:
    """Order of the scored variants by DIC, with honesty flags.

    near_tie is set when the two best DIC values sit within tie_margin
    of each other; lpml_disagrees when the leave-one-out score prefers a
    different variant than DIC does.  Neither flag changes the order,
    they are surfaced for the caller to weigh.
    """

    order: tuple[str, ...]
    best_by_dic: str
    best_by_lpml: str
    near_tie: bool
    lpml_disagrees: bool
    tie_margin: float


def dic(draws: PosteriorDraws, dataset: Dataset | None = None) -> DicResult:
    _check_dataset(draws, dataset)
    loglik = draws.pooled("loglik")
    dbar = float(-2.0 * loglik.sum(axis=1).mean())
    theta_bar = draws.pooled("theta").mean(axis=0)
    resid = draws.y - theta_bar
    ll_at_mean = -0.5 * (
        np.log(2.0 * np.pi * draws.design_var) + resid ** 2 / draws.design_var
    )
    d_at_mean = float(-2.0 * ll_at_mean.sum())
    p_d = dbar - d_at_mean
    if p_d < 0.0:
        log.warning(
            "negative effective parameter count p_d=%.3f for variant %s; "
            "the posterior mean is a poor plug-in here and DIC is suspect",
            p_d, draws.variant.id,
        )
    return DicResult(dbar=dbar, d_at_mean=d_at_mean, p_d=p_d, dic=dbar + p_d)


def cpo(draws: PosteriorDraws, dataset: Dataset | None = None,
        log_range_threshold: float = 50.0) -> CpoResult:
    """Harmonic-mean CPO from within-sample draws.

    log CPO_i = log S - logsumexp_s(-loglik_is).  The estimator is exact
    in the limit but its variance blows up when single draws dominate
    the inverse likelihoods, so the spread of -loglik per observation is
    checked against log_range_threshold and the computed values are
    attached to the UnstableCPO raised on failure.
    """
    _check_dataset(draws, dataset)
    neg = -draws.pooled("loglik")   # (S, n_obs)
    s = neg.shape[0]
    log_cpo = np.log(s) - logsumexp(neg, axis=0)
    lpml = float(log_cpo.sum())
    spread = neg.max(axis=0) - neg.min(axis=0)
    worst = int(np.argmax(spread))
    if float(spread[worst]) > log_range_threshold:
        raise UnstableCPO(
            f"inverse likelihood for observation {worst} spans "
            f"{spread[worst]:.1f} log units (threshold {log_range_threshold}); "
            "the harmonic-mean CPO is unreliable here",
            cpo_values=log_cpo,
            lpml=lpml,
        )
    return CpoResult(log_cpo=log_cpo, lpml=lpml)


def score_model(draws: PosteriorDraws, dataset: Dataset | None = None,
                log_range_threshold: float = 50.0) -> ModelScore:
    """DIC and LPML in one record; an unstable CPO is flagged, not hidden."""
    d = dic(draws, dataset)
    unstable = False
    try:
        c = cpo(draws, dataset, log_range_threshold=log_range_threshold)
        lpml, log_cpo = c.lpml, c.log_cpo
    except UnstableCPO as exc:
        unstable = True
        lpml = exc.lpml if exc.lpml is not None else float("nan")
        log_cpo = exc.cpo_values
    return ModelScore(
        variant_id=draws.variant.id,
        dbar=d.dbar,
        d_at_mean=d.d_at_mean,
        p_d=d.p_d,
        dic=d.dic,
        lpml=lpml,
        log_cpo=log_cpo,
        cpo_unstable=unstable,
    )


def residuals(draws: PosteriorDraws, dataset: Dataset | None = None) -> pd.DataFrame:
    """Standardized residuals (y - theta_hat) / design_sd, all observations.

    Summary statistics (mean, sd, largest magnitude and where it occurs)
    ride along in frame.attrs["summary"]; residual_summary() recomputes
    them from any residual table.
    """
    _check_dataset(draws, dataset)
    theta_bar = draws.pooled("theta").mean(axis=0)
    sd = np.sqrt(draws.design_var)
    frame = pd.DataFrame(
        {
            "area_id": [draws.area_ids[i] for i in draws.obs_area],
            "time_index": [draws.time_indices[t] for t in draws.obs_time],
            "y": draws.y,
            "theta_hat": theta_bar,
            "sd": sd,
            "std_residual": (draws.y - theta_bar) / sd,
        }
    )
    frame.attrs["summary"] = residual_summary(frame)
    return frame


def residual_summary(frame: pd.DataFrame) -> dict:
    """Mean, spread and worst case of a standardized residual table."""
    r = frame["std_residual"].to_numpy(dtype=float)
    worst = int(np.argmax(np.abs(r)))
    return {
        "mean": float(r.mean()),
        "sd": float(r.std(ddof=1)) if r.size > 1 else 0.0,
        "max_abs": float(abs(r[worst])),
        "max_abs_area": str(frame["area_id"].iloc[worst]),
        "n": int(r.size),
    }


def rank_models(scores, tie_margin: float = 0.5) -> Ranking:
    """Rank by DIC (ascending) and cross-check against LPML (descending)."""
    scores = list(scores)
    if not scores:
        raise ValueError("no model scores to rank")
    ids = [s.variant_id for s in scores]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate model ids in scores: {ids}")
    by_dic = sorted(scores, key=lambda s: s.dic)
    finite_lpml = [s for s in scores if np.isfinite(s.lpml)]
    by_lpml = max(finite_lpml, key=lambda s: s.lpml) if finite_lpml else by_dic[0]
    near_tie = (
        len(by_dic) > 1 and abs(by_dic[0].dic - by_dic[1].dic) <= tie_margin
    )
    return Ranking(
        order=tuple(s.variant_id for s in by_dic),
        best_by_dic=by_dic[0].variant_id,
        best_by_lpml=by_lpml.variant_id,
        near_tie=near_tie,
        lpml_disagrees=by_lpml.variant_id != by_dic[0].variant_id,
        tie_margin=tie_margin,
    )
