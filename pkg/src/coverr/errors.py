"""Exception hierarchy shared across the package.

Every error names the offending file, row, area, or parameter in its
message so CLI users can fix inputs without reading a stack trace.
"""


class CoverrError(Exception):
    """Base class for all package errors."""


# --- ingestion -----------------------------------------------------------

class IngestError(CoverrError):
    """A problem with one of the four tabular inputs."""


class MissingColumn(IngestError):
    pass


class DuplicateKey(IngestError):
    pass


class UnresolvedAreaId(IngestError):
    pass


class NonPositiveVariance(IngestError):
    pass


class MissingValue(IngestError):
    """A physically present row has an empty or non-numeric cell."""


class InvalidRow(IngestError):
    """A row violates a structural rule (e.g. a self-pair in adjacency)."""


class EmptyWindow(IngestError):
    """No covariate years fall inside the configured window."""


class DatasetEmpty(IngestError):
    """No area survives the join of the four inputs."""


# --- coverage arithmetic -------------------------------------------------

class NonPositiveTruePopulation(CoverrError):
    """C + N <= 0, so no rate exists."""


# --- spatial structure ---------------------------------------------------

class SpatialError(CoverrError):
    """A problem with the spatial weight system or its diagnostics."""


class MissingRate(SpatialError):
    pass


class AllPruned(SpatialError):
    """Every area was pruned: no usable spatial structure."""


class SubsetTooSmall(SpatialError):
    pass


class DegenerateRates(SpatialError):
    """All rates equal; Moran's I undefined."""


class RhoOutOfRange(SpatialError):
    """|rho| must be < 1 for the proper autoregressive law."""


class NotPositiveDefinite(SpatialError):
    """Signals a violated weight-system invariant."""


# --- model / sampler configuration ---------------------------------------

class ModelError(CoverrError):
    pass


class DimensionMismatch(ModelError):
    pass


class WindowTooShort(ModelError):
    """Too few time points for the requested random-walk order."""


class ConfigError(ModelError):
    pass


class LayoutError(ModelError):
    """Synthetic layout cannot produce a usable area grid."""


# --- numerics ------------------------------------------------------------

class NumericalFailure(CoverrError):
    """A conditional precision matrix failed to factor; indicates an
    invariant violation upstream, not a user input problem."""


class UnstableCPO(CoverrError):
    """The harmonic-mean CPO estimate is dominated by a few draws.

    The exception still carries the computed values so callers that only
    want a flag can proceed: ``exc.cpo_values``, ``exc.lpml``.
    """

    def __init__(self, message, cpo_values=None, lpml=None):
        super().__init__(message)
        self.cpo_values = cpo_values
        self.lpml = lpml
