"""Hierarchical small-area estimation of census coverage-error rates.

The package turns direct survey estimates of net coverage error for
small areas (with known design variances) into model-based estimates,
using a nested family of Bayesian mixed models fit by Gibbs sampling:
large-area effects, covariate-driven area effects, a random-walk time
smoother, a proper autoregressive spatial field on a distance-and-sign
weighted neighbour graph, and a space-time interaction.  Exploratory
spatial diagnostics, deviance and leave-one-out model scores, and a
synthetic-data harness round out the workflow; the command line in
coverr.cli drives it end to end.
"""

from .coverage import CoverageAccount, gross_error, net_error, net_error_rate
from .errors import (
    AllPruned,
    ConfigError,
    CoverrError,
    DatasetEmpty,
    DegenerateRates,
    DimensionMismatch,
    DuplicateKey,
    EmptyWindow,
    IngestError,
    InvalidRow,
    LayoutError,
    MissingColumn,
    MissingRate,
    MissingValue,
    ModelError,
    NonPositiveTruePopulation,
    NonPositiveVariance,
    NotPositiveDefinite,
    NumericalFailure,
    RhoOutOfRange,
    SpatialError,
    SubsetTooSmall,
    UnresolvedAreaId,
    UnstableCPO,
    WindowTooShort,
)
from .gibbs import (
    ChainConfig,
    ConvergenceReport,
    PosteriorDraws,
    convergence_report,
    effective_sample_size,
    predict,
    run_chain,
    split_rhat,
)
from .ingest import AreaRecord, Dataset, IngestConfig, load_dataset, summarize_covariates
from .model import (
    Hyperpriors,
    ModelVariant,
    ParameterState,
    VARIANTS,
    covariate_mean,
    invgamma_mean,
    invgamma_update,
    irw_structure,
    linear_predictor,
    rho_log_prior,
)
from .pipeline import Comparison, Diagnosis, FitResult, compare_models, diagnose, fit_model
from .selection import (
    CpoResult,
    DicResult,
    ModelScore,
    Ranking,
    cpo,
    dic,
    rank_models,
    residual_summary,
    residuals,
    score_model,
)
from .spatial import (
    MoranResult,
    VariogramCloud,
    WeightConfig,
    WeightSystem,
    build_weight_system,
    car_covariance,
    car_precision,
    contiguity_matrix,
    distance_matrix,
    morans_i,
    variogram_cloud,
)
from .synthetic import SyntheticTruth, generate, write_csvs

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
