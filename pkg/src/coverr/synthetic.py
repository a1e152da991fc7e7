"""Synthetic small-area data with known truth, for calibration studies.

Areas sit on a rows-by-cols grid with queen contiguity, split into
vertical bands of nearly equal width that play the role of the large
areas.  Random effects are drawn from the same laws the sampler assumes,
so coverage and model-recovery experiments measure the fitting code and
not a data mismatch.

One deliberate wrinkle: the spatial field is drawn on the weight system
with every declared edge active.  The fitted system gates an edge off
when the two observed rates disagree in sign, so a simulation whose
rates straddle zero fits a slightly different system than generated.
Pick the intercept and noise scale with that in mind (an all-positive
rate surface keeps the systems identical).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import LayoutError, NumericalFailure
from .ingest import AreaRecord, Dataset, IngestConfig
from .model import ModelVariant, ParameterState, VARIANTS, irw_structure
from .spatial import WeightSystem, build_weight_system, contiguity_matrix, distance_matrix


@dataclass(frozen=True)
class SyntheticTruth:
    """The generated dataset together with everything that made it."""

    dataset: Dataset
    variant: ModelVariant
    state: ParameterState          # realized true parameter values
    theta: np.ndarray              # (m, n_times) true small-area rates
    weight_system: WeightSystem | None
    seed: int

    @property
    def theta_target(self) -> np.ndarray:
        """True rates at the target (latest) time point."""
        return self.theta[:, -1]


def _queen_pairs(rows: int, cols: int, ids) -> list[tuple[str, str]]:
    pairs = set()
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == dc == 0:
                        continue
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < rows and 0 <= cc < cols:
                        j = rr * cols + cc
                        a, b = ids[i], ids[j]
                        pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


def generate(rows: int, cols: int, n_large: int = 4, n_times: int = 1,
             n_covariates: int = 2, variant="V", *, mu: float = 2.0,
             lam_sd: float = 0.5, beta_coef=None, tau2: float = 0.25,
             sigma2_gamma: float = 0.1, sigma2_u: float = 0.5,
             rho: float = 0.8, sigma2_delta: float = 0.05,
             design_sd=1.0, seed: int = 0, start_year: int = 2018,
             n_years: int = 3, coord_step: float = 0.5) -> SyntheticTruth:
    """Draw one replicate: truth from the model's own laws, then noise.

    A variance set to zero collapses its effect to the mean (for example
    tau2=0 makes the area effects sit exactly on the regression surface),
    which gives noise-free limits for calibration checks.  design_sd may
    be zero too, in which case y equals theta exactly; note the fitting
    side still requires positive design variances, so a fully noiseless
    draw is only useful for in-memory identities.
    """
    if isinstance(variant, str):
        variant = ModelVariant.from_id(variant)
    if rows < 1 or cols < 1 or rows * cols < 4:
        raise LayoutError(
            f"the grid must contain at least 4 areas, got {rows}x{cols}"
        )
    if not 1 <= n_large <= cols:
        raise LayoutError(
            f"n_large must be between 1 and cols={cols} (areas are grouped "
            f"into vertical bands), got {n_large}"
        )
    if n_covariates < 0 or n_years < 1 or n_times < 1:
        raise LayoutError("n_covariates >= 0, n_years >= 1, n_times >= 1 required")
    if coord_step <= 0:
        raise LayoutError(f"coord_step must be positive, got {coord_step}")
    for name, value in (("lam_sd", lam_sd), ("tau2", tau2),
                        ("sigma2_gamma", sigma2_gamma), ("sigma2_u", sigma2_u),
                        ("sigma2_delta", sigma2_delta)):
        if value < 0:
            raise LayoutError(f"{name} must be >= 0, got {value}")
    if not -1.0 < rho < 1.0:
        raise LayoutError(f"rho must lie in (-1, 1), got {rho}")
    m = rows * cols
    if variant.includes_time_smoother and n_times < 2:
        raise LayoutError(
            f"variant {variant.id} includes a time smoother; n_times must be >= 2"
        )
    sd = np.broadcast_to(np.asarray(design_sd, dtype=float), (m, n_times)).copy()
    if np.any(sd < 0):
        raise LayoutError("design_sd must be >= 0")

    rng = np.random.default_rng(seed)
    ids = [f"A{i:04d}" for i in range(m)]
    band_edges = np.linspace(0, cols, n_large + 1)
    areas = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            band = int(np.searchsorted(band_edges, c, side="right") - 1)
            band = min(band, n_large - 1)
            areas.append(AreaRecord(
                area_id=ids[i],
                name=f"cell r{r} c{c}",
                large_area_id=f"S{band:02d}",
                latitude=40.0 + r * coord_step,
                longitude=-100.0 + c * coord_step,
            ))
    large_index = {g: k for k, g in enumerate(sorted({a.large_area_id for a in areas}))}
    p = n_covariates
    x = rng.standard_normal((m, p))
    coef = np.zeros(p) if beta_coef is None else np.asarray(beta_coef, dtype=float)
    if coef.shape != (p,):
        raise LayoutError(f"beta_coef must have length {p}, got shape {coef.shape}")

    state = ParameterState.initial(m, n_large, p, n_times, m, mu=mu)
    state.tau2, state.sigma2_gamma = tau2, sigma2_gamma
    state.sigma2_u, state.rho, state.sigma2_delta = sigma2_u, rho, sigma2_delta
    state.beta_coef = coef

    if variant.includes_large_area and n_large > 1:
        lam = rng.normal(0.0, lam_sd, n_large)
        state.lam = lam - lam.mean()
    if variant.includes_covariate_effect:
        state.beta_re = x @ coef + rng.normal(0.0, np.sqrt(tau2), m)
    if variant.includes_time_smoother:
        k = irw_structure(n_times)
        w, v = linalg.eigh(k)
        keep = w > 1e-10 * w.max()
        z = rng.standard_normal(int(keep.sum()))
        state.gamma = v[:, keep] @ (z * np.sqrt(sigma2_gamma / w[keep]))

    system = None
    if variant.includes_space_smoother:
        pairs = _queen_pairs(rows, cols, ids)
        dist = distance_matrix(areas)
        contig = contiguity_matrix(pairs, ids, {aid: 1.0 for aid in ids})
        system = build_weight_system(dist, contig, ids)
        if system.n != m:
            raise LayoutError("the generator's weight system pruned areas; "
                              "the grid layout should prevent this")
        if sigma2_u == 0.0:
            state.phi = np.zeros(m)
        else:
            q = (np.diag(system.row_sums) - rho * system.w_star) / sigma2_u
            try:
                cf = linalg.cho_factor(q, lower=True)
            except np.linalg.LinAlgError:
                raise NumericalFailure(
                    f"spatial precision is not positive definite at rho={rho}"
                ) from None
            state.phi = linalg.solve_triangular(
                cf[0], rng.standard_normal(m), lower=True, trans="T"
            )
    if variant.includes_interaction:
        state.delta = rng.normal(0.0, np.sqrt(sigma2_delta), (m, n_times))

    theta = np.full((m, n_times), mu)
    if variant.includes_large_area:
        theta += state.lam[[large_index[a.large_area_id] for a in areas]][:, None]
    if variant.includes_covariate_effect:
        theta += state.beta_re[:, None]
    if variant.includes_time_smoother:
        theta += state.gamma[None, :]
    if variant.includes_space_smoother:
        theta += state.phi[:, None]
    if variant.includes_interaction:
        theta += state.delta

    y = theta + sd * rng.standard_normal((m, n_times))

    years = tuple(range(start_year, start_year + n_years))
    config = IngestConfig(
        target_time_index=n_times - 1,
        window_start=years[0],
        window_end=years[-1],
    )
    dataset = Dataset(
        areas=tuple(areas),
        large_ids=tuple(sorted(large_index)),
        time_indices=tuple(range(n_times)),
        target_time=n_times - 1,
        y=y.reshape(-1),
        design_var=(sd ** 2).reshape(-1),
        obs_area=np.repeat(np.arange(m), n_times),
        obs_time=np.tile(np.arange(n_times), m),
        covariate_names=tuple(f"x{j + 1}" for j in range(p)),
        panel_years=years,
        panel=np.repeat(x[:, None, :], n_years, axis=1),
        adjacency=tuple(_queen_pairs(rows, cols, ids)),
        dropped=(),
        config=config,
    )
    return SyntheticTruth(
        dataset=dataset, variant=variant, state=state, theta=theta,
        weight_system=system, seed=seed,
    )


def write_csvs(truth: SyntheticTruth, out_dir) -> dict[str, Path]:
    """Write the replicate as the four input files plus the truth table.

    The files round-trip through load_dataset, so a generated study can
    be pushed through the command line exactly like real data.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = truth.dataset

    paths = {
        "areas": out / "areas.csv",
        "estimates": out / "estimates.csv",
        "covariates": out / "covariates.csv",
        "adjacency": out / "adjacency.csv",
        "truth": out / "truth.json",
    }
    pd.DataFrame(
        {
            "area_id": [a.area_id for a in ds.areas],
            "name": [a.name for a in ds.areas],
            "large_area_id": [a.large_area_id for a in ds.areas],
            "latitude": [a.latitude for a in ds.areas],
            "longitude": [a.longitude for a in ds.areas],
        }
    ).to_csv(paths["areas"], index=False)
    pd.DataFrame(
        {
            "area_id": [ds.areas[i].area_id for i in ds.obs_area],
            "time_index": [ds.time_indices[t] for t in ds.obs_time],
            "rate_pct": ds.y,
            "design_sd_pct": np.sqrt(ds.design_var),
        }
    ).to_csv(paths["estimates"], index=False)
    cov_rows = []
    for i, a in enumerate(ds.areas):
        for j, year in enumerate(ds.panel_years):
            row = {"area_id": a.area_id, "year": year}
            row.update(
                {nm: ds.panel[i, j, k] for k, nm in enumerate(ds.covariate_names)}
            )
            cov_rows.append(row)
    pd.DataFrame(cov_rows).to_csv(paths["covariates"], index=False)
    pd.DataFrame(ds.adjacency, columns=["area_id_a", "area_id_b"]).to_csv(
        paths["adjacency"], index=False
    )
    st = truth.state
    m, n_times = truth.theta.shape
    record = {
        "variant": truth.variant.id,
        "seed": truth.seed,
        "parameters": {
            "mu": st.mu,
            "lam": st.lam.tolist(),
            "beta_coef": st.beta_coef.tolist(),
            "tau2": st.tau2,
            "sigma2_gamma": st.sigma2_gamma,
            "sigma2_u": st.sigma2_u,
            "rho": st.rho,
            "sigma2_delta": st.sigma2_delta,
        },
        "theta_true": [
            {
                "area_id": ds.areas[i].area_id,
                "time_index": int(ds.time_indices[t]),
                "theta": float(truth.theta[i, t]),
            }
            for i in range(m)
            for t in range(n_times)
        ],
    }
    paths["truth"].write_text(json.dumps(record, indent=2, sort_keys=True))
    return paths
