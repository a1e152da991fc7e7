"""Gibbs sampler for the nested family of small-area models.

Every full conditional is available in closed form except the spatial
dependence parameter rho, which is drawn on a fixed midpoint grid
(griddy Gibbs).  The scan is systematic and blocks that the variant
excludes are skipped entirely, so a given (variant, seed) pair consumes
an identical random stream regardless of which other variants exist.

Derivations of the conditionals live in docs/full_conditionals.md.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import ConfigError, DimensionMismatch, NumericalFailure
from .ingest import Dataset, summarize_covariates
from .model import (
    Hyperpriors,
    ModelVariant,
    ParameterState,
    invgamma_update,
    irw_structure,
    rho_log_prior,
)
from .spatial import WeightSystem

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))

# When only one time point is observed the time smoother and the
# space-time interaction are not identifiable and the variant falls
# back to its closest relative without them.
COLLAPSE_AT_SINGLE_TIME = {"I": "IV", "II": "IV", "III": "V"}

MIN_RETAINED_FOR_PREDICTION = 100


@dataclass(frozen=True)
class ChainConfig:
    """Run-length and reproducibility settings for the sampler."""

    iterations: int = 6000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    n_chains: int = 1
    rho_grid_size: int = 201

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"burn_in must satisfy 0 <= burn_in < iterations, "
                f"got burn_in={self.burn_in} iterations={self.iterations}"
            )
        if self.thin < 1:
            raise ConfigError(f"thin must be >= 1, got {self.thin}")
        if self.n_chains < 1:
            raise ConfigError(f"n_chains must be >= 1, got {self.n_chains}")
        if self.rho_grid_size < 21:
            raise ConfigError(
                f"rho_grid_size must be >= 21, got {self.rho_grid_size}"
            )
        if (self.iterations - self.burn_in) // self.thin < 1:
            raise ConfigError(
                f"no draws would be retained: iterations={self.iterations} "
                f"burn_in={self.burn_in} thin={self.thin}"
            )

    @property
    def n_retained_per_chain(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class PosteriorDraws:
    """Retained draws from one or more chains, plus enough metadata to
    predict and score without re-reading the dataset.

    Blocks the effective variant excludes are None.  Array layouts put
    the chain axis first: scalars are (chains, retained) and vector
    blocks append their own dimensions.
    """

    variant: ModelVariant
    requested_variant: ModelVariant
    config: ChainConfig
    hyperpriors: Hyperpriors
    collapsed: bool
    area_ids: tuple[str, ...]
    large_ids: tuple[str, ...]
    covariate_names: tuple[str, ...]
    time_indices: tuple[int, ...]
    target_time_pos: int
    y: np.ndarray
    design_var: np.ndarray
    obs_area: np.ndarray
    obs_time: np.ndarray
    mu: np.ndarray
    lam: np.ndarray | None
    beta_coef: np.ndarray | None
    beta_re: np.ndarray | None
    tau2: np.ndarray | None
    gamma: np.ndarray | None
    sigma2_gamma: np.ndarray | None
    phi: np.ndarray | None
    sigma2_u: np.ndarray | None
    rho: np.ndarray | None
    delta: np.ndarray | None
    sigma2_delta: np.ndarray | None
    theta: np.ndarray
    loglik: np.ndarray

    @property
    def n_chains(self) -> int:
        return self.mu.shape[0]

    @property
    def n_retained_per_chain(self) -> int:
        return self.mu.shape[1]

    @property
    def n_total(self) -> int:
        return self.mu.shape[0] * self.mu.shape[1]

    def pooled(self, name: str) -> np.ndarray | None:
        """A block with the chain axis flattened away, or None if inactive."""
        arr = getattr(self, name)
        if arr is None:
            return None
        return arr.reshape(-1, *arr.shape[2:]) if arr.ndim > 2 else arr.reshape(-1)

    def scalar_blocks(self) -> dict[str, np.ndarray]:
        """Active scalar parameters, each as a (chains, retained) array."""
        out = {"mu": self.mu}
        for name in ("tau2", "sigma2_gamma", "sigma2_u", "rho", "sigma2_delta"):
            arr = getattr(self, name)
            if arr is not None:
                out[name] = arr
        return out


def _draw_invgamma(rng: np.random.Generator, shape: float, rate: float,
                   what: str) -> float:
    g = rng.gamma(shape)
    if not np.isfinite(g) or g <= 0.0:
        raise NumericalFailure(
            f"{what}: gamma draw degenerated (shape={shape}, rate={rate})"
        )
    return rate / g


def _mvn_from_precision(q: np.ndarray, lin: np.ndarray,
                        rng: np.random.Generator, what: str) -> np.ndarray:
    """One draw from N(Q^{-1} lin, Q^{-1}) via the Cholesky factor of Q."""
    try:
        cf = linalg.cho_factor(q, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalFailure(
            f"{what}: conditional precision matrix is not positive definite"
        ) from None
    mean = linalg.cho_solve(cf, lin)
    z = rng.standard_normal(q.shape[0])
    return mean + linalg.solve_triangular(cf[0], z, lower=True, trans="T")


class _Sampler:
    """Precomputed context for scans over one dataset and variant."""

    def __init__(self, dataset: Dataset, system: WeightSystem | None,
                 variant: ModelVariant, hyper: Hyperpriors, config: ChainConfig):
        self.variant = variant
        self.hyper = hyper
        self.y = dataset.y
        self.P = 1.0 / dataset.design_var
        self.obs_area = dataset.obs_area
        self.obs_time = dataset.obs_time
        self.m = dataset.m
        self.L = len(dataset.large_ids)
        self.T = len(dataset.time_indices)
        self.n_obs = dataset.n_obs
        self.large_of_obs = dataset.area_large_index[dataset.obs_area]
        self.ll_const = -0.5 * (LOG_2PI + np.log(dataset.design_var))

        if variant.includes_covariate_effect:
            self.X = summarize_covariates(dataset)
            self.p = self.X.shape[1]
            if self.p:
                try:
                    self.xtx_cho = linalg.cho_factor(self.X.T @ self.X)
                except np.linalg.LinAlgError:
                    raise NumericalFailure(
                        "covariate design matrix X'X is singular; drop or "
                        "combine collinear covariates"
                    ) from None
        else:
            self.X = np.zeros((self.m, 0))
            self.p = 0

        if variant.includes_time_smoother:
            self.K = irw_structure(self.T, hyper.irw_order)
            self.k_rank = self.T - hyper.irw_order

        if variant.includes_space_smoother:
            if system is None:
                raise DimensionMismatch(
                    f"variant {variant.id} includes a spatial term; a weight "
                    "system is required"
                )
            if set(system.kept_ids) != set(dataset.area_ids):
                raise DimensionMismatch(
                    "the weight system covers a different area set than the "
                    "dataset; restrict the dataset to the kept areas first"
                )
            self.n_s = system.n
            index_of = {aid: k for k, aid in enumerate(system.kept_ids)}
            space_of_area = np.array([index_of[a] for a in dataset.area_ids])
            self.space_of_obs = space_of_area[self.obs_area]
            self.r_sums = system.row_sums
            self.w_star = system.w_star
            # Grid for the griddy rho draw.  Writing
            # diag(r) - rho W* = D^{1/2} (I - rho B) D^{1/2},
            # B = D^{-1/2} W* D^{-1/2}, turns every grid log-determinant
            # into a sum over the (fixed) eigenvalues of B.
            g = config.rho_grid_size
            self.rho_grid = -1.0 + (2.0 * np.arange(g) + 1.0) / g
            d_half = np.sqrt(self.r_sums)
            b = self.w_star / np.outer(d_half, d_half)
            eigs = linalg.eigvalsh(b)
            one_minus = 1.0 - np.outer(self.rho_grid, eigs)
            if np.any(one_minus <= 0.0):
                raise NumericalFailure(
                    "spatial precision loses positive definiteness on the "
                    "rho grid; the weight system is malformed"
                )
            self.grid_logdet_half = 0.5 * np.sum(np.log(one_minus), axis=1)
            self.grid_logprior = np.array(
                [rho_log_prior(r) for r in self.rho_grid]
            )
        else:
            self.n_s = 0

    def initial_state(self) -> ParameterState:
        mu0 = float((self.P * self.y).sum() / self.P.sum())
        return ParameterState.initial(
            self.m, self.L, self.p, self.T, self.n_s, mu=mu0
        )

    def check_init(self, state: ParameterState) -> None:
        v = self.variant
        expected = {"lam": (self.L,) if v.includes_large_area else None,
                    "beta_coef": (self.p,) if v.includes_covariate_effect else None,
                    "beta_re": (self.m,) if v.includes_covariate_effect else None,
                    "gamma": (self.T,) if v.includes_time_smoother else None,
                    "phi": (self.n_s,) if v.includes_space_smoother else None,
                    "delta": (self.m, self.T) if v.includes_interaction else None}
        for name, shape in expected.items():
            if shape is None:
                continue
            got = getattr(state, name).shape
            if got != shape:
                raise DimensionMismatch(
                    f"initial state: {name} has shape {got}, expected {shape}"
                )

    def predictor_vector(self, state: ParameterState,
                         skip: str | None = None) -> np.ndarray:
        """Sum of the active terms per observation, minus the one named
        by skip.  skip="alpha" excludes both the intercept and the
        large-area effects, matching how that block is drawn.
        """
        t = np.zeros(self.n_obs)
        v = self.variant
        if skip != "alpha":
            t += state.mu
            if v.includes_large_area:
                t += state.lam[self.large_of_obs]
        if v.includes_covariate_effect and skip != "beta_re":
            t += state.beta_re[self.obs_area]
        if v.includes_time_smoother and skip != "gamma":
            t += state.gamma[self.obs_time]
        if v.includes_space_smoother and skip != "phi":
            t += state.phi[self.space_of_obs]
        if v.includes_interaction and skip != "delta":
            t += state.delta[self.obs_area, self.obs_time]
        return t

    def partial_residual(self, state: ParameterState, skip: str | None) -> np.ndarray:
        """y minus every active term except the one named by skip."""
        return self.y - self.predictor_vector(state, skip)

    def theta_vector(self, state: ParameterState) -> np.ndarray:
        return self.predictor_vector(state)

    def loglik_vector(self, theta: np.ndarray) -> np.ndarray:
        return self.ll_const - 0.5 * self.P * (self.y - theta) ** 2

    # --- one systematic scan -------------------------------------------

    def scan(self, state: ParameterState, rng: np.random.Generator) -> None:
        v = self.variant
        a0, b0 = self.hyper.ig_shape, self.hyper.ig_rate

        # Intercept and large-area effects, drawn jointly through the
        # per-group means alpha_l = mu + lam_l (flat prior), then split.
        r = self.partial_residual(state, "alpha")
        pr = self.P * r
        if v.includes_large_area:
            prec = np.bincount(self.large_of_obs, weights=self.P, minlength=self.L)
            lin = np.bincount(self.large_of_obs, weights=pr, minlength=self.L)
            if np.any(prec <= 0.0):
                raise NumericalFailure(
                    "a large-area group has no observations; its flat-prior "
                    "conditional is improper"
                )
            alpha = lin / prec + rng.standard_normal(self.L) / np.sqrt(prec)
            state.mu = float(alpha.mean())
            state.lam = alpha - state.mu
        else:
            prec = float(self.P.sum())
            state.mu = float(pr.sum() / prec + rng.standard_normal() / np.sqrt(prec))

        if v.includes_covariate_effect:
            # Area effects: independent normals around the regression mean.
            r = self.partial_residual(state, "beta_re")
            prec_data = np.bincount(self.obs_area, weights=self.P, minlength=self.m)
            lin = np.bincount(self.obs_area, weights=self.P * r, minlength=self.m)
            reg_mean = self.X @ state.beta_coef
            prec = 1.0 / state.tau2 + prec_data
            mean = (reg_mean / state.tau2 + lin) / prec
            state.beta_re = mean + rng.standard_normal(self.m) / np.sqrt(prec)

            if self.p:
                # Coefficients: ordinary least squares against the area
                # effects, with covariance tau2 (X'X)^{-1}.
                bhat = linalg.cho_solve(self.xtx_cho, self.X.T @ state.beta_re)
                z = rng.standard_normal(self.p)
                state.beta_coef = bhat + np.sqrt(state.tau2) * linalg.solve_triangular(
                    self.xtx_cho[0], z, lower=False
                )

            resid = state.beta_re - self.X @ state.beta_coef
            ss = float(resid @ resid)
            if ss <= 0.0:
                raise NumericalFailure(
                    "area effects match the regression surface exactly; the "
                    "scale-free conditional for tau2 is improper"
                )
            shape, rate = invgamma_update(0.0, 0.0, self.m, ss)
            state.tau2 = _draw_invgamma(rng, shape, rate, "tau2")

        if v.includes_time_smoother:
            # Random-walk smoother; the draw's mean shifts into mu so the
            # stored gamma keeps its sum-to-zero identification.
            r = self.partial_residual(state, "gamma")
            prec_data = np.bincount(self.obs_time, weights=self.P, minlength=self.T)
            lin = np.bincount(self.obs_time, weights=self.P * r, minlength=self.T)
            q = np.diag(prec_data) + self.K / state.sigma2_gamma
            draw = _mvn_from_precision(q, lin, rng, "time smoother")
            shift = float(draw.mean())
            state.gamma = draw - shift
            state.mu += shift

            quad = float(state.gamma @ self.K @ state.gamma)
            shape, rate = invgamma_update(a0, b0, self.k_rank, quad)
            state.sigma2_gamma = _draw_invgamma(rng, shape, rate, "sigma2_gamma")

        if v.includes_space_smoother:
            r = self.partial_residual(state, "phi")
            prec_data = np.bincount(self.space_of_obs, weights=self.P, minlength=self.n_s)
            lin = np.bincount(self.space_of_obs, weights=self.P * r, minlength=self.n_s)
            q_prior = (np.diag(self.r_sums) - state.rho * self.w_star) / state.sigma2_u
            q = np.diag(prec_data) + q_prior
            state.phi = _mvn_from_precision(q, lin, rng, "spatial effect")

            qr = float(self.r_sums @ (state.phi ** 2))
            qw = float(state.phi @ self.w_star @ state.phi)
            shape, rate = invgamma_update(a0, b0, self.n_s, qr - state.rho * qw)
            state.sigma2_u = _draw_invgamma(rng, shape, rate, "sigma2_u")

            # Griddy draw for rho: exact log-density on the midpoint grid,
            # determinants folded into the cached eigenvalue sums.
            logw = (self.grid_logdet_half
                    - (qr - self.rho_grid * qw) / (2.0 * state.sigma2_u)
                    + self.grid_logprior)
            logw -= logw.max()
            cdf = np.cumsum(np.exp(logw))
            u = rng.random() * cdf[-1]
            g = min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)
            state.rho = float(self.rho_grid[g])

        if v.includes_interaction:
            # Each cell is conditionally independent; cells with no
            # observation fall back to a fresh prior draw because their
            # data precision is zero.
            r = self.partial_residual(state, "delta")
            flat = self.obs_area * self.T + self.obs_time
            n_cells = self.m * self.T
            prec_data = np.bincount(flat, weights=self.P, minlength=n_cells)
            lin = np.bincount(flat, weights=self.P * r, minlength=n_cells)
            prec = 1.0 / state.sigma2_delta + prec_data
            mean = lin / prec
            draw = mean + rng.standard_normal(n_cells) / np.sqrt(prec)
            state.delta = draw.reshape(self.m, self.T)

            ss = float((state.delta ** 2).sum())
            shape, rate = invgamma_update(a0, b0, n_cells, ss)
            state.sigma2_delta = _draw_invgamma(rng, shape, rate, "sigma2_delta")


def _resolve_variant(dataset: Dataset, variant) -> tuple[ModelVariant, ModelVariant, bool]:
    if isinstance(variant, str):
        variant = ModelVariant.from_id(variant)
    requested = variant
    collapsed = False
    if len(dataset.time_indices) == 1 and variant.id in COLLAPSE_AT_SINGLE_TIME:
        effective = ModelVariant.from_id(COLLAPSE_AT_SINGLE_TIME[variant.id])
        warnings.warn(
            f"only one time point observed: variant {variant.id} collapses "
            f"to {effective.id} (time smoother and space-time interaction "
            "dropped)",
            UserWarning,
            stacklevel=3,
        )
        log.info("variant %s collapsed to %s", variant.id, effective.id)
        variant, collapsed = effective, True
    return variant, requested, collapsed


def run_chain(dataset: Dataset, weight_system: WeightSystem | None = None,
              variant="V", hyperpriors: Hyperpriors | None = None,
              config: ChainConfig | None = None,
              init=None) -> PosteriorDraws:
    """Run the Gibbs sampler and return the retained draws.

    Chains are seeded from independent spawns of SeedSequence(config.seed),
    so results are reproducible bit for bit across runs and machines with
    the same dependency versions.  By default every chain starts at the
    same state: intercept at the precision-weighted mean of y, all
    effects at zero, all variances at one.  ``init`` may be a single
    ParameterState (shared) or a sequence of one state per chain, which
    is how overdispersed starting points are supplied.
    """
    hyper = hyperpriors or Hyperpriors()
    cfg = config or ChainConfig()
    variant, requested, collapsed = _resolve_variant(dataset, variant)
    smp = _Sampler(dataset, weight_system, variant, hyper, cfg)

    c_n, r_n = cfg.n_chains, cfg.n_retained_per_chain
    n_obs = dataset.n_obs
    store: dict[str, np.ndarray | None] = {
        "mu": np.empty((c_n, r_n)),
        "theta": np.empty((c_n, r_n, n_obs)),
        "loglik": np.empty((c_n, r_n, n_obs)),
        "lam": np.empty((c_n, r_n, smp.L)) if variant.includes_large_area else None,
        "beta_coef": np.empty((c_n, r_n, smp.p)) if variant.includes_covariate_effect else None,
        "beta_re": np.empty((c_n, r_n, smp.m)) if variant.includes_covariate_effect else None,
        "tau2": np.empty((c_n, r_n)) if variant.includes_covariate_effect else None,
        "gamma": np.empty((c_n, r_n, smp.T)) if variant.includes_time_smoother else None,
        "sigma2_gamma": np.empty((c_n, r_n)) if variant.includes_time_smoother else None,
        "phi": np.empty((c_n, r_n, smp.n_s)) if variant.includes_space_smoother else None,
        "sigma2_u": np.empty((c_n, r_n)) if variant.includes_space_smoother else None,
        "rho": np.empty((c_n, r_n)) if variant.includes_space_smoother else None,
        "delta": np.empty((c_n, r_n, smp.m, smp.T)) if variant.includes_interaction else None,
        "sigma2_delta": np.empty((c_n, r_n)) if variant.includes_interaction else None,
    }

    if init is None:
        inits = [None] * c_n
    elif isinstance(init, ParameterState):
        smp.check_init(init)
        inits = [init] * c_n
    else:
        inits = list(init)
        if len(inits) != c_n:
            raise ConfigError(
                f"got {len(inits)} initial states for {c_n} chains"
            )
        for st in inits:
            smp.check_init(st)

    seeds = np.random.SeedSequence(cfg.seed).spawn(c_n)
    for c in range(c_n):
        rng = np.random.default_rng(seeds[c])
        state = inits[c].copy() if inits[c] is not None else smp.initial_state()
        ridx = 0
        for it in range(cfg.iterations):
            smp.scan(state, rng)
            if it >= cfg.burn_in and (it - cfg.burn_in + 1) % cfg.thin == 0:
                theta = smp.theta_vector(state)
                store["mu"][c, ridx] = state.mu
                store["theta"][c, ridx] = theta
                store["loglik"][c, ridx] = smp.loglik_vector(theta)
                if store["lam"] is not None:
                    store["lam"][c, ridx] = state.lam
                if store["beta_coef"] is not None:
                    store["beta_coef"][c, ridx] = state.beta_coef
                    store["beta_re"][c, ridx] = state.beta_re
                    store["tau2"][c, ridx] = state.tau2
                if store["gamma"] is not None:
                    store["gamma"][c, ridx] = state.gamma
                    store["sigma2_gamma"][c, ridx] = state.sigma2_gamma
                if store["phi"] is not None:
                    store["phi"][c, ridx] = state.phi
                    store["sigma2_u"][c, ridx] = state.sigma2_u
                    store["rho"][c, ridx] = state.rho
                if store["delta"] is not None:
                    store["delta"][c, ridx] = state.delta
                    store["sigma2_delta"][c, ridx] = state.sigma2_delta
                ridx += 1

    return PosteriorDraws(
        variant=variant,
        requested_variant=requested,
        config=cfg,
        hyperpriors=hyper,
        collapsed=collapsed,
        area_ids=dataset.area_ids,
        large_ids=dataset.large_ids,
        covariate_names=dataset.covariate_names if variant.includes_covariate_effect else (),
        time_indices=dataset.time_indices,
        target_time_pos=dataset.time_indices.index(dataset.target_time),
        y=dataset.y.copy(),
        design_var=dataset.design_var.copy(),
        obs_area=dataset.obs_area.copy(),
        obs_time=dataset.obs_time.copy(),
        **store,
    )


def predict(draws: PosteriorDraws, variant=None) -> pd.DataFrame:
    """Posterior summaries of theta for each area at the target time.

    ``variant`` is an optional cross-check: when given it must name the
    variant the draws were produced under.  Requires at least
    MIN_RETAINED_FOR_PREDICTION retained draws per chain; anything
    shorter is fine for smoke runs but too short to quote intervals from.
    """
    if variant is not None:
        vid = variant if isinstance(variant, str) else variant.id
        if vid not in (draws.variant.id, draws.requested_variant.id):
            raise ConfigError(
                f"draws were produced under variant {draws.variant.id} "
                f"(requested {draws.requested_variant.id}), not {vid}"
            )
    if draws.n_retained_per_chain < MIN_RETAINED_FOR_PREDICTION:
        raise ConfigError(
            f"prediction needs >= {MIN_RETAINED_FOR_PREDICTION} retained "
            f"draws per chain, got {draws.n_retained_per_chain}; raise "
            "iterations or lower burn_in/thin"
        )
    sel = np.flatnonzero(draws.obs_time == draws.target_time_pos)
    theta = draws.pooled("theta")[:, sel]
    rows = {
        "area_id": [draws.area_ids[i] for i in draws.obs_area[sel]],
        "y": draws.y[sel],
        "design_sd": np.sqrt(draws.design_var[sel]),
        "theta_hat": theta.mean(axis=0),
        "posterior_sd": theta.std(axis=0, ddof=1),
        "ci_low": np.quantile(theta, 0.025, axis=0),
        "ci_high": np.quantile(theta, 0.975, axis=0),
        "model_id": draws.variant.id,
    }
    return pd.DataFrame(rows).sort_values("area_id", ignore_index=True)


# --- convergence assessment ---------------------------------------------


def _split_sequences(x: np.ndarray) -> np.ndarray:
    """Each chain cut in half (odd middles dropped): (2C, R // 2)."""
    c, r = x.shape
    half = r // 2
    return np.concatenate([x[:, :half], x[:, r - half:]], axis=0)


def split_rhat(x: np.ndarray) -> float:
    """Potential scale reduction on split chains (NaN below 4 draws)."""
    x = np.asarray(x, dtype=float)
    seqs = _split_sequences(x)
    n = seqs.shape[1]
    if n < 2:
        return float("nan")
    w = seqs.var(axis=1, ddof=1).mean()
    if w <= 0.0:
        return 1.0
    var_plus = (n - 1) / n * w + seqs.mean(axis=1).var(ddof=1)
    return float(np.sqrt(var_plus / w))


def _autocov(seq: np.ndarray) -> np.ndarray:
    n = seq.size
    d = seq - seq.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(x: np.ndarray) -> float:
    """ESS on split chains with Geyer's initial monotone sequence."""
    x = np.asarray(x, dtype=float)
    seqs = _split_sequences(x)
    n_seq, n = seqs.shape
    total = n_seq * n
    if n < 8:
        return float("nan")
    w = seqs.var(axis=1, ddof=1).mean()
    if w <= 0.0:
        return float(total)
    var_plus = (n - 1) / n * w + seqs.mean(axis=1).var(ddof=1)
    acov = np.mean([_autocov(s) for s in seqs], axis=0)
    rho = 1.0 - (w - acov) / var_plus

    tau = -1.0
    prev = np.inf
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    tau = max(tau, 1.0 / np.log10(max(total, 10)))
    return float(min(total / tau, total * np.log10(max(total, 10))))


@dataclass(frozen=True)
class ConvergenceRow:
    name: str
    rhat: float
    ess: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]
    threshold: float = 1.05

    @property
    def flagged(self) -> tuple[str, ...]:
        return tuple(
            r.name for r in self.rows
            if np.isfinite(r.rhat) and r.rhat > self.threshold
        )

    @property
    def converged(self) -> bool:
        return not self.flagged

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"parameter": [r.name for r in self.rows],
             "rhat": [r.rhat for r in self.rows],
             "ess": [r.ess for r in self.rows]}
        )


def convergence_report(draws: PosteriorDraws, threshold: float = 1.05) -> ConvergenceReport:
    """Split R-hat and effective sample size for the monitored series.

    Scalars and short vectors are monitored coordinate by coordinate;
    for the long blocks (area effects, spatial effects, interactions)
    only the worst coordinate is reported.
    """
    rows: list[ConvergenceRow] = []

    def add(name: str, series: np.ndarray) -> None:
        rows.append(ConvergenceRow(name, split_rhat(series), effective_sample_size(series)))

    def add_worst(name: str, block: np.ndarray) -> None:
        flat = block.reshape(block.shape[0], block.shape[1], -1)
        stats = [(split_rhat(flat[:, :, j]), effective_sample_size(flat[:, :, j]))
                 for j in range(flat.shape[2])]
        worst_rhat = max((s[0] for s in stats if np.isfinite(s[0])), default=float("nan"))
        worst_ess = min((s[1] for s in stats if np.isfinite(s[1])), default=float("nan"))
        rows.append(ConvergenceRow(f"{name}[worst]", worst_rhat, worst_ess))

    add("mu", draws.mu)
    if draws.lam is not None:
        for j, gid in enumerate(draws.large_ids):
            add(f"lam[{gid}]", draws.lam[:, :, j])
    if draws.beta_coef is not None:
        for j, nm in enumerate(draws.covariate_names):
            add(f"beta_coef[{nm}]", draws.beta_coef[:, :, j])
        add("tau2", draws.tau2)
        add_worst("beta_re", draws.beta_re)
    if draws.gamma is not None:
        for j, t in enumerate(draws.time_indices):
            add(f"gamma[{t}]", draws.gamma[:, :, j])
        add("sigma2_gamma", draws.sigma2_gamma)
    if draws.phi is not None:
        add("sigma2_u", draws.sigma2_u)
        add("rho", draws.rho)
        add_worst("phi", draws.phi)
    if draws.delta is not None:
        add("sigma2_delta", draws.sigma2_delta)
        add_worst("delta", draws.delta)
    return ConvergenceReport(rows=tuple(rows), threshold=threshold)
