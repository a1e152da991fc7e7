"""Read and validate the four tabular inputs, then assemble the dataset.

Expected files (CSV, UTF-8, header row, '.' decimal separator):

    areas.csv       area_id,name,large_area_id,latitude,longitude
    estimates.csv   area_id,time_index,rate_pct,design_sd_pct
    covariates.csv  area_id,year,<covariate_1>,...,<covariate_p>
    adjacency.csv   area_id_a,area_id_b

The join keeps every area that (a) appears in areas.csv, (b) has a
direct estimate at the configured target time index, and (c) has a
complete covariate panel over the configured year window.  Everything
else is dropped with a reported reason, never imputed.  All ordering is
canonicalized (areas by id, observations by (area, time)), so ingestion
is a pure, deterministic function of file contents.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DatasetEmpty,
    DuplicateKey,
    EmptyWindow,
    IngestError,
    InvalidRow,
    MissingColumn,
    MissingValue,
    NonPositiveVariance,
    UnresolvedAreaId,
)

log = logging.getLogger(__name__)

AGGREGATIONS = ("mean", "last_year", "linear_lag")


@dataclass(frozen=True)
class AreaRecord:
    area_id: str
    name: str
    large_area_id: str
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidRow(f"area {self.area_id}: latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidRow(f"area {self.area_id}: longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class IngestConfig:
    """Knobs read from the key=value config file."""

    target_time_index: int | None = None  # default: the largest index present
    window_start: int | None = None       # calendar years, inclusive
    window_end: int | None = None
    covariate_aggregation: str = "mean"
    covariates: tuple[str, ...] | None = None  # whitelist; None = all columns

    def __post_init__(self):
        if self.covariate_aggregation not in AGGREGATIONS:
            raise IngestError(
                f"covariate_aggregation must be one of {AGGREGATIONS}, "
                f"got {self.covariate_aggregation!r}"
            )


@dataclass(frozen=True)
class Dataset:
    """The assembled analysis dataset (immutable, canonically ordered)."""

    areas: tuple[AreaRecord, ...]              # sorted by area_id
    large_ids: tuple[str, ...]                 # sorted distinct
    time_indices: tuple[int, ...]              # sorted distinct
    target_time: int
    y: np.ndarray                              # (n_obs,) direct rates
    design_var: np.ndarray                     # (n_obs,) design variances
    obs_area: np.ndarray                       # (n_obs,) index into areas
    obs_time: np.ndarray                       # (n_obs,) index into time_indices
    covariate_names: tuple[str, ...]
    panel_years: tuple[int, ...]               # sorted years inside the window
    panel: np.ndarray                          # (m, n_years, p) covariate values
    adjacency: tuple[tuple[str, str], ...]     # normalized unordered pairs
    dropped: tuple[tuple[str, str], ...]       # (area_id, reason)
    config: IngestConfig

    @property
    def m(self) -> int:
        return len(self.areas)

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def area_ids(self) -> tuple[str, ...]:
        return tuple(a.area_id for a in self.areas)

    @property
    def area_large_index(self) -> np.ndarray:
        lookup = {g: k for k, g in enumerate(self.large_ids)}
        return np.array([lookup[a.large_area_id] for a in self.areas])

    def target_rates(self) -> dict[str, float]:
        """area_id -> direct rate at the target time index."""
        t = self.time_indices.index(self.target_time)
        sel = self.obs_time == t
        return {
            self.areas[i].area_id: float(v)
            for i, v in zip(self.obs_area[sel], self.y[sel])
        }

    def restrict(self, keep_ids) -> "Dataset":
        """A new dataset limited to keep_ids (order re-canonicalized)."""
        keep = set(keep_ids)
        idx = [i for i, a in enumerate(self.areas) if a.area_id in keep]
        if not idx:
            raise DatasetEmpty("restriction removed every area")
        areas = tuple(self.areas[i] for i in idx)
        remap = {old: new for new, old in enumerate(idx)}
        obs_sel = np.isin(self.obs_area, idx)
        obs_area = np.array([remap[i] for i in self.obs_area[obs_sel]])
        old_times = self.obs_time[obs_sel]
        kept_tidx = sorted(set(old_times.tolist()))
        time_indices = tuple(self.time_indices[t] for t in kept_tidx)
        tmap = {old: new for new, old in enumerate(kept_tidx)}
        obs_time = np.array([tmap[t] for t in old_times])
        ids = {a.area_id for a in areas}
        return replace(
            self,
            areas=areas,
            large_ids=tuple(sorted({a.large_area_id for a in areas})),
            time_indices=time_indices,
            y=self.y[obs_sel].copy(),
            design_var=self.design_var[obs_sel].copy(),
            obs_area=obs_area,
            obs_time=obs_time,
            panel=self.panel[idx].copy(),
            adjacency=tuple(p for p in self.adjacency if p[0] in ids and p[1] in ids),
        )


def _read_csv(path, required, label) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{label} file not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise MissingColumn(f"{path.name}: missing column(s) {missing}")
    return df


def _to_float(value, where) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise MissingValue(f"{where}: {value!r} is not a number") from None
    if not np.isfinite(out):
        raise MissingValue(f"{where}: {value!r} is not finite")
    return out


def _to_int(value, where) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise MissingValue(f"{where}: {value!r} is not an integer") from None


def load_dataset(areas_path, estimates_path, covariates_path, adjacency_path,
                 config: IngestConfig = IngestConfig()) -> Dataset:
    """Join the four inputs on area_id into an immutable Dataset.

    Areas lacking a direct estimate at the target time index, or lacking
    a complete covariate panel over the window, are dropped and reported
    via Dataset.dropped and the module logger.
    """
    areas_df = _read_csv(
        areas_path, ["area_id", "name", "large_area_id", "latitude", "longitude"], "areas"
    )
    est_df = _read_csv(
        estimates_path, ["area_id", "time_index", "rate_pct", "design_sd_pct"], "estimates"
    )
    cov_df = _read_csv(covariates_path, ["area_id", "year"], "covariates")
    adj_df = _read_csv(adjacency_path, ["area_id_a", "area_id_b"], "adjacency")

    areas_name = Path(areas_path).name
    est_name = Path(estimates_path).name
    cov_name = Path(covariates_path).name
    adj_name = Path(adjacency_path).name

    # --- areas ---
    dup = areas_df["area_id"][areas_df["area_id"].duplicated()]
    if not dup.empty:
        raise DuplicateKey(f"{areas_name}: duplicate area_id {dup.iloc[0]!r}")
    records = {}
    for row_no, row in enumerate(areas_df.itertuples(index=False), start=2):
        records[row.area_id] = AreaRecord(
            area_id=row.area_id,
            name=row.name,
            large_area_id=row.large_area_id,
            latitude=_to_float(row.latitude, f"{areas_name} row {row_no} latitude"),
            longitude=_to_float(row.longitude, f"{areas_name} row {row_no} longitude"),
        )

    # --- estimates ---
    estimates: dict[tuple[str, int], tuple[float, float]] = {}
    for row_no, row in enumerate(est_df.itertuples(index=False), start=2):
        if row.area_id not in records:
            raise UnresolvedAreaId(
                f"{est_name} row {row_no}: unknown area_id {row.area_id!r}"
            )
        t = _to_int(row.time_index, f"{est_name} row {row_no} time_index")
        key = (row.area_id, t)
        if key in estimates:
            raise DuplicateKey(
                f"{est_name} row {row_no}: duplicate (area_id, time_index) {key}"
            )
        sd = _to_float(row.design_sd_pct, f"{est_name} row {row_no} design_sd_pct")
        if sd <= 0:
            raise NonPositiveVariance(
                f"{est_name} row {row_no}: design_sd_pct must be > 0, got {sd}"
            )
        rate = _to_float(row.rate_pct, f"{est_name} row {row_no} rate_pct")
        estimates[key] = (rate, sd * sd)

    if not estimates:
        raise DatasetEmpty(f"{est_name}: no estimate rows")
    all_times = sorted({t for (_, t) in estimates})
    target_time = config.target_time_index if config.target_time_index is not None else all_times[-1]
    if target_time not in all_times:
        raise IngestError(
            f"target_time_index {target_time} has no rows in {est_name}; present: {all_times}"
        )

    # --- covariates ---
    cov_names = [c for c in cov_df.columns if c not in ("area_id", "year")]
    if config.covariates is not None:
        missing = [c for c in config.covariates if c not in cov_names]
        if missing:
            raise MissingColumn(f"{cov_name}: whitelisted covariate(s) {missing} not present")
        cov_names = list(config.covariates)

    panel_values: dict[tuple[str, int], np.ndarray] = {}
    years_seen: set[int] = set()
    for row_no, row_dict in enumerate(cov_df.to_dict("records"), start=2):
        aid = row_dict["area_id"]
        if aid not in records:
            raise UnresolvedAreaId(f"{cov_name} row {row_no}: unknown area_id {aid!r}")
        year = _to_int(row_dict["year"], f"{cov_name} row {row_no} year")
        key = (aid, year)
        if key in panel_values:
            raise DuplicateKey(f"{cov_name} row {row_no}: duplicate (area_id, year) {key}")
        vals = np.array(
            [_to_float(row_dict[c], f"{cov_name} row {row_no} {c!r}") for c in cov_names]
        )
        panel_values[key] = vals
        years_seen.add(year)

    window_start = config.window_start if config.window_start is not None else (min(years_seen) if years_seen else None)
    window_end = config.window_end if config.window_end is not None else (max(years_seen) if years_seen else None)
    if cov_names:
        panel_years = tuple(sorted(y for y in years_seen if window_start <= y <= window_end))
        if not panel_years:
            raise EmptyWindow(
                f"no covariate years inside the window [{window_start}, {window_end}]; "
                f"years present: {sorted(years_seen)}"
            )
    else:
        panel_years = ()

    # --- adjacency ---
    pairs: set[tuple[str, str]] = set()
    for row_no, row in enumerate(adj_df.itertuples(index=False), start=2):
        a, b = row.area_id_a, row.area_id_b
        for aid in (a, b):
            if aid not in records:
                raise UnresolvedAreaId(f"{adj_name} row {row_no}: unknown area_id {aid!r}")
        if a == b:
            raise InvalidRow(f"{adj_name} row {row_no}: self-pair {a!r}")
        pairs.add((min(a, b), max(a, b)))

    # --- join ---
    dropped: list[tuple[str, str]] = []
    kept: list[AreaRecord] = []
    for aid in sorted(records):
        if (aid, target_time) not in estimates:
            dropped.append((aid, f"no direct estimate at time index {target_time}"))
            continue
        missing_years = [yr for yr in panel_years if (aid, yr) not in panel_values]
        if missing_years:
            dropped.append((aid, f"covariate panel missing year(s) {missing_years}"))
            continue
        kept.append(records[aid])
    if not kept:
        raise DatasetEmpty(
            "no area has both a target-time estimate and a complete covariate panel"
        )
    for aid, reason in dropped:
        log.info("dropping area %s: %s", aid, reason)

    kept_ids = [a.area_id for a in kept]
    kept_set = set(kept_ids)
    time_indices = tuple(
        sorted({t for (aid, t) in estimates if aid in kept_set and t <= target_time})
    )
    tmap = {t: k for k, t in enumerate(time_indices)}

    obs = []
    for i, aid in enumerate(kept_ids):
        for t in time_indices:
            if (aid, t) in estimates:
                rate, var = estimates[(aid, t)]
                obs.append((i, tmap[t], rate, var))
    obs_area = np.array([o[0] for o in obs])
    obs_time = np.array([o[1] for o in obs])
    y = np.array([o[2] for o in obs])
    design_var = np.array([o[3] for o in obs])

    panel = np.empty((len(kept), len(panel_years), len(cov_names)))
    for i, aid in enumerate(kept_ids):
        for j, yr in enumerate(panel_years):
            panel[i, j, :] = panel_values[(aid, yr)]

    return Dataset(
        areas=tuple(kept),
        large_ids=tuple(sorted({a.large_area_id for a in kept})),
        time_indices=time_indices,
        target_time=target_time,
        y=y,
        design_var=design_var,
        obs_area=obs_area,
        obs_time=obs_time,
        covariate_names=tuple(cov_names),
        panel_years=panel_years,
        panel=panel,
        adjacency=tuple(sorted(p for p in pairs if p[0] in kept_set and p[1] in kept_set)),
        dropped=tuple(dropped),
        config=config,
    )


def summarize_covariates(dataset: Dataset, aggregation: str | None = None) -> np.ndarray:
    """One row per area: covariates aggregated over the year window.

    mean        unweighted mean over the window years (default)
    last_year   the most recent year's values
    linear_lag  weights rising linearly toward the most recent year

    No intercept column is added; the model supplies its own.
    """
    agg = aggregation or dataset.config.covariate_aggregation
    if agg not in AGGREGATIONS:
        raise IngestError(f"aggregation must be one of {AGGREGATIONS}, got {agg!r}")
    p = len(dataset.covariate_names)
    if p == 0:
        return np.zeros((dataset.m, 0))
    n_years = len(dataset.panel_years)
    if n_years == 0:
        raise EmptyWindow("the covariate panel holds no years")
    if agg == "mean":
        return dataset.panel.mean(axis=1)
    if agg == "last_year":
        return dataset.panel[:, -1, :].copy()
    weights = np.arange(1, n_years + 1, dtype=float)
    weights /= weights.sum()
    return np.einsum("ijk,j->ik", dataset.panel, weights)
