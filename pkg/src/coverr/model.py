"""Model variants, priors, and fixed structure matrices for the sampler.

The observation model is Gaussian with known design variances:

    y_k ~ N(theta_k, V_k)

and the linear predictor composes up to five terms on top of a global
intercept, switched on and off by the model variant:

    theta = mu + lambda[large_area] + beta_re[area] + gamma[time]
            + phi[space] + delta[area, time]

Effect laws: beta_re[i] ~ N(x_i' beta_coef, tau2) carries the covariate
signal, gamma is an intrinsic random walk over time indices, phi follows
the proper conditional autoregressive law built in :mod:`coverr.spatial`,
and delta is iid N(0, sigma2_delta) over (area, time) cells.  Flat priors
sit on (mu, lambda) and (beta_coef, log tau2); the three variance
components share an Inv-Gamma(0.025, 0.025) prior, parameterized as
shape/rate with density proportional to x^-(a+1) * exp(-b/x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch, RhoOutOfRange, WindowTooShort

VARIANT_IDS = ("I", "II", "III", "IV", "V", "VI", "VII")


@dataclass(frozen=True)
class ModelVariant:
    """One row of the candidate-model table: which terms are active."""

    id: str
    includes_covariate_effect: bool
    includes_time_smoother: bool
    includes_space_smoother: bool
    includes_interaction: bool
    includes_large_area: bool

    @staticmethod
    def from_id(variant_id: str) -> "ModelVariant":
        try:
            return VARIANTS[variant_id.upper()]
        except KeyError:
            raise ConfigError(
                f"unknown model variant {variant_id!r}; expected one of {', '.join(VARIANT_IDS)}"
            ) from None


# The nested family: each row drops terms from the one above it.
VARIANTS = {
    "I": ModelVariant("I", True, True, True, True, True),
    "II": ModelVariant("II", True, True, True, False, True),
    "III": ModelVariant("III", True, True, False, False, True),
    "IV": ModelVariant("IV", True, False, True, False, True),
    "V": ModelVariant("V", True, False, False, False, True),
    "VI": ModelVariant("VI", False, False, False, False, True),
    "VII": ModelVariant("VII", False, False, False, False, False),
}


def rho_log_prior(rho: float) -> float:
    """Log of the (unnormalized) endpoint-weighted prior on rho.

    density(rho) = 1 / (2 pi sqrt(1 - rho^2)) on |rho| < 1.  The density
    puts extra mass near the endpoints; it integrates to 1/2 and is used
    unnormalized (the posterior is unaffected).
    """
    if not abs(rho) < 1.0:
        raise RhoOutOfRange(f"rho must satisfy |rho| < 1, got {rho}")
    return -(math.log(2.0 * math.pi) + 0.5 * math.log1p(-rho * rho))


@dataclass(frozen=True)
class Hyperpriors:
    """Prior hyperparameters shared by all variants.

    ig_shape/ig_rate parameterize the Inv-Gamma prior on the three
    variance components (shape/rate convention).  Flat priors on
    (mu, lambda) and (beta_coef, log tau2) carry no hyperparameters.
    """

    ig_shape: float = 0.025
    ig_rate: float = 0.025
    irw_order: int = 1
    covariate_link: str = "linear"

    def __post_init__(self):
        if self.ig_shape <= 0 or self.ig_rate <= 0:
            raise ConfigError(
                f"Inv-Gamma hyperparameters must be positive, got "
                f"shape={self.ig_shape}, rate={self.ig_rate}"
            )
        if self.irw_order not in (1, 2):
            raise ConfigError(f"irw_order must be 1 or 2, got {self.irw_order}")
        if self.covariate_link != "linear":
            # Only the linear link keeps every full conditional conjugate.
            raise ConfigError(
                f"unsupported covariate_link {self.covariate_link!r}; only 'linear' is available"
            )

    def rho_log_prior(self, rho: float) -> float:
        return rho_log_prior(rho)


@dataclass
class ParameterState:
    """All unknowns at one sampler iteration.

    Vectors are sized for the dataset at hand: lambda over L large areas,
    beta_re over m areas, gamma over T time indices, phi over the n kept
    spatial areas, delta over the m x T area-time grid.  Blocks that the
    active variant excludes stay at their initial values and are never
    updated.
    """

    mu: float
    lam: np.ndarray
    beta_coef: np.ndarray
    beta_re: np.ndarray
    tau2: float
    gamma: np.ndarray
    sigma2_gamma: float
    phi: np.ndarray
    sigma2_u: float
    rho: float
    delta: np.ndarray  # shape (m, T)
    sigma2_delta: float

    def copy(self) -> "ParameterState":
        return ParameterState(
            mu=self.mu,
            lam=self.lam.copy(),
            beta_coef=self.beta_coef.copy(),
            beta_re=self.beta_re.copy(),
            tau2=self.tau2,
            gamma=self.gamma.copy(),
            sigma2_gamma=self.sigma2_gamma,
            phi=self.phi.copy(),
            sigma2_u=self.sigma2_u,
            rho=self.rho,
            delta=self.delta.copy(),
            sigma2_delta=self.sigma2_delta,
        )

    def check_constraints(self, tol: float = 1e-10) -> None:
        """Assert positivity of variances and the identification sums."""
        for name in ("tau2", "sigma2_gamma", "sigma2_u", "sigma2_delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.lam.size and abs(self.lam.sum()) > tol:
            raise ValueError(f"lambda must sum to zero, got {self.lam.sum()!r}")
        if self.gamma.size >= 2 and abs(self.gamma.sum()) > tol:
            raise ValueError(f"gamma must sum to zero, got {self.gamma.sum()!r}")

    @staticmethod
    def initial(m: int, L: int, p: int, T: int, n_spatial: int,
                mu: float = 0.0) -> "ParameterState":
        """Deterministic center-of-mass start: effects zero, variances one."""
        return ParameterState(
            mu=mu,
            lam=np.zeros(L),
            beta_coef=np.zeros(p),
            beta_re=np.zeros(m),
            tau2=1.0,
            gamma=np.zeros(T),
            sigma2_gamma=1.0,
            phi=np.zeros(n_spatial),
            sigma2_u=1.0,
            rho=0.0,
            delta=np.zeros((m, T)),
            sigma2_delta=1.0,
        )


def linear_predictor(state: ParameterState, variant: ModelVariant,
                     area: int, large_area: int, time: int, space: int | None) -> float:
    """Compose theta for one observation; inactive terms contribute 0.

    ``space`` indexes the kept spatial areas and may be None when the
    variant has no spatial term.
    """
    theta = state.mu
    if variant.includes_large_area:
        theta += state.lam[large_area]
    if variant.includes_covariate_effect:
        theta += state.beta_re[area]
    if variant.includes_time_smoother:
        theta += state.gamma[time]
    if variant.includes_space_smoother:
        if space is None:
            raise DimensionMismatch("variant includes a spatial term but space index is None")
        theta += state.phi[space]
    if variant.includes_interaction:
        theta += state.delta[area, time]
    return float(theta)


def covariate_mean(x_row: np.ndarray, beta_coef: np.ndarray) -> float:
    """The (linear) covariate link: x' beta."""
    x_row = np.asarray(x_row, dtype=float)
    beta_coef = np.asarray(beta_coef, dtype=float)
    if x_row.shape != beta_coef.shape:
        raise DimensionMismatch(
            f"covariate row has shape {x_row.shape} but coefficients have {beta_coef.shape}"
        )
    return float(x_row @ beta_coef)


def irw_structure(n_times: int, order: int = 1) -> np.ndarray:
    """Random-walk penalty matrix K = D'D of the given difference order.

    K is symmetric positive semidefinite with rank n_times - order; the
    implied prior on gamma is the intrinsic Gaussian
    exp(-gamma' K gamma / (2 sigma2_gamma)) under a sum-to-zero constraint.
    """
    if order < 1:
        raise ConfigError(f"difference order must be >= 1, got {order}")
    if n_times < order + 1:
        raise WindowTooShort(
            f"need at least order + 1 = {order + 1} time points for an "
            f"order-{order} random walk, got {n_times}"
        )
    d = np.eye(n_times)
    for _ in range(order):
        d = np.diff(d, axis=0)
    return d.T @ d


def invgamma_update(shape: float, rate: float, n_effects: int, sum_sq: float) -> tuple[float, float]:
    """Conjugate Inv-Gamma update for a variance component.

    Given n_effects Gaussian effects with prior variance x and summed
    squared (penalized) magnitude sum_sq, the posterior is
    Inv-Gamma(shape + n/2, rate + sum_sq/2).
    """
    return shape + 0.5 * n_effects, rate + 0.5 * sum_sq


def invgamma_mean(shape: float, rate: float) -> float:
    """Mean of Inv-Gamma(shape, rate): rate / (shape - 1), shape > 1."""
    if shape <= 1:
        raise ValueError(f"Inv-Gamma mean requires shape > 1, got {shape}")
    return rate / (shape - 1.0)
