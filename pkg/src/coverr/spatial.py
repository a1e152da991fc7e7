"""Spatial weight system, proper-CAR precision, and exploratory diagnostics.

The weight kernel combines centroid distance with sign-screened
contiguity:

    w_star[i, j] = exp(-d[i, j])**a * contig[i, j]**b

where contig[i, j] is 1 only when i and j are declared neighbours AND
their rates point the same way (y_i * y_j > 0, strictly).  Areas whose
row (equivalently, column) sum of w_star is zero are pruned until a
fixed point; the survivors get a row-standardized matrix W and the
diagonal scaling M = diag(1 / row_sum).

The proper autoregressive law used by the sampler is
phi ~ N(0, sigma2_u * (I - rho W)^-1 M), whose precision has the closed
form (diag(row_sums) - rho * w_star) / sigma2_u, symmetric by
construction and positive definite for |rho| < 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats
from scipy.spatial.distance import cdist

from .errors import (
    AllPruned,
    ConfigError,
    DegenerateRates,
    DimensionMismatch,
    MissingRate,
    NotPositiveDefinite,
    RhoOutOfRange,
    SubsetTooSmall,
)

SUBSET_LABELS = ("all", "undercount", "overcount")


@dataclass(frozen=True)
class WeightConfig:
    """Kernel exponents and the distance rule; the conventional choice
    is a = b = 1 with straight-line distance on the centroid coordinates.
    """

    exponent_a: float = 1.0
    exponent_b: float = 1.0
    distance_metric: str = "euclidean"

    def __post_init__(self):
        if self.distance_metric != "euclidean":
            raise ConfigError(
                f"only the euclidean distance metric is supported, "
                f"got {self.distance_metric!r}"
            )


@dataclass(frozen=True)
class WeightSystem:
    """The spatial graph over the areas that survived pruning."""

    kept_ids: tuple[str, ...]
    w_star: np.ndarray
    w: np.ndarray
    row_sums: np.ndarray
    m_diag: np.ndarray  # 1 / row_sums; M = diag(m_diag)
    pruned: tuple[tuple[str, str], ...]  # (area_id, reason)

    @property
    def n(self) -> int:
        return len(self.kept_ids)

    def index_of(self, area_id: str) -> int:
        return self.kept_ids.index(area_id)

    @staticmethod
    def from_star(kept_ids, w_star, pruned=()) -> "WeightSystem":
        """Build the derived matrices from an already-pruned w_star."""
        w_star = np.asarray(w_star, dtype=float)
        if w_star.ndim != 2 or w_star.shape[0] != w_star.shape[1]:
            raise DimensionMismatch(f"w_star must be square, got {w_star.shape}")
        if len(kept_ids) != w_star.shape[0]:
            raise DimensionMismatch(
                f"{len(kept_ids)} ids for a {w_star.shape[0]}x{w_star.shape[1]} matrix"
            )
        if not np.array_equal(w_star, w_star.T):
            raise DimensionMismatch("w_star must be symmetric")
        r = w_star.sum(axis=1)
        if np.any(r <= 0):
            bad = [kept_ids[i] for i in np.nonzero(r <= 0)[0]]
            raise NotPositiveDefinite(f"zero row sums for kept areas {bad}; prune first")
        return WeightSystem(
            kept_ids=tuple(kept_ids),
            w_star=w_star,
            w=w_star / r[:, None],
            row_sums=r,
            m_diag=1.0 / r,
            pruned=tuple(pruned),
        )


@dataclass(frozen=True)
class VariogramCloud:
    """Squared pairwise rate differences against pairwise distance."""

    points: np.ndarray  # shape (n_pairs, 2): distance, squared difference
    subset_label: str


@dataclass(frozen=True)
class MoranResult:
    I: float
    expected_I: float
    sd_I: float
    p_value: float


def distance_matrix(areas) -> np.ndarray:
    """Pairwise Euclidean distance on raw (latitude, longitude) degrees.

    areas: a sequence of records with latitude/longitude attributes, or
    an (n, 2) array of coordinates.
    """
    first = areas[0] if len(areas) else None
    if hasattr(first, "latitude"):
        coords = np.array([[a.latitude, a.longitude] for a in areas], dtype=float)
    else:
        coords = np.asarray(areas, dtype=float).reshape(len(areas), -1)
    if coords.shape[0] < 2:
        raise DimensionMismatch("need at least 2 areas for a distance matrix")
    if not np.all(np.isfinite(coords)):
        raise DimensionMismatch("coordinates must be finite")
    return cdist(coords, coords)


def contiguity_matrix(pairs, area_ids, rates) -> np.ndarray:
    """Binary contiguity screened by rate direction.

    pairs: iterable of (id_a, id_b) neighbour declarations.
    rates: mapping area_id -> rate.  An entry is 1 only for declared
    neighbours whose rates satisfy y_i * y_j > 0; a zero rate never
    qualifies.
    """
    index = {a: i for i, a in enumerate(area_ids)}
    n = len(area_ids)
    missing = [a for a in area_ids if a not in rates]
    if missing:
        raise MissingRate(f"no rate for area(s) {missing[:5]}")
    contig = np.zeros((n, n))
    for a, b in pairs:
        if a not in index or b not in index:
            # pairs touching areas outside this universe are ignored here;
            # referential integrity is enforced at ingestion
            continue
        i, j = index[a], index[b]
        if rates[a] * rates[b] > 0:
            contig[i, j] = 1.0
            contig[j, i] = 1.0
    return contig


def build_weight_system(distances, contiguity, area_ids,
                        config: WeightConfig = WeightConfig()) -> WeightSystem:
    """Compute w_star, prune isolated areas to a fixed point, standardize.

    Pruning removes every area whose row sum or column sum of w_star is
    zero, and repeats on the submatrix until nothing changes (one pass
    suffices while the kernel stays symmetric, but the loop is kept in
    case a future kernel breaks symmetry).
    """
    d = np.asarray(distances, float)
    c = np.asarray(contiguity, float)
    if d.shape != c.shape or d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionMismatch(f"distance {d.shape} and contiguity {c.shape} must be square and equal")
    n = d.shape[0]
    if len(area_ids) != n:
        raise DimensionMismatch(f"{len(area_ids)} ids for {n}x{n} matrices")

    w_star = np.exp(-config.exponent_a * d) * c ** config.exponent_b
    np.fill_diagonal(w_star, 0.0)

    alive = np.ones(n, dtype=bool)
    pruned: list[tuple[str, str]] = []
    pass_no = 0
    while True:
        pass_no += 1
        sub = w_star[np.ix_(alive, alive)]
        row_zero = sub.sum(axis=1) == 0
        col_zero = sub.sum(axis=0) == 0
        dead = row_zero | col_zero
        if not dead.any():
            break
        alive_idx = np.nonzero(alive)[0]
        for k in alive_idx[dead]:
            pruned.append((area_ids[k], f"zero weight row/column (pass {pass_no})"))
            alive[k] = False
        if not alive.any():
            raise AllPruned(
                "every area has zero weight to every other: no usable spatial structure"
            )
    kept = np.nonzero(alive)[0]
    return WeightSystem.from_star(
        [area_ids[k] for k in kept], w_star[np.ix_(kept, kept)], pruned
    )


def car_precision(system: WeightSystem, sigma2_u: float, rho: float) -> np.ndarray:
    """Precision of the proper autoregressive law on the kept areas.

    Q = (diag(row_sums) - rho * w_star) / sigma2_u, the exact inverse of
    sigma2_u * (I - rho W)^-1 M.  Symmetric because w_star is; positive
    definite for |rho| < 1 by strict diagonal dominance.
    """
    if not abs(rho) < 1.0:
        raise RhoOutOfRange(f"rho must satisfy |rho| < 1, got {rho}")
    if sigma2_u <= 0:
        raise ValueError(f"sigma2_u must be positive, got {sigma2_u}")
    q = (np.diag(system.row_sums) - rho * system.w_star) / sigma2_u
    try:
        linalg.cholesky(q, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            f"precision is not positive definite at rho={rho}; "
            "the weight system violates its invariants"
        ) from exc
    return q


def car_covariance(system: WeightSystem, sigma2_u: float, rho: float) -> np.ndarray:
    """Dense covariance sigma2_u * (I - rho W)^-1 M (diagnostic use)."""
    if not abs(rho) < 1.0:
        raise RhoOutOfRange(f"rho must satisfy |rho| < 1, got {rho}")
    n = system.n
    return sigma2_u * linalg.solve(np.eye(n) - rho * system.w, np.diag(system.m_diag))


def variogram_cloud(rates, distances, subset: str = "all") -> VariogramCloud:
    """One point per unordered pair: (distance, squared rate difference).

    subset selects all areas, the positive-rate (undercount) areas, or
    the negative-rate (overcount) areas.
    """
    if subset not in SUBSET_LABELS:
        raise ValueError(f"subset must be one of {SUBSET_LABELS}, got {subset!r}")
    y = np.asarray(rates, float)
    d = np.asarray(distances, float)
    if subset == "undercount":
        keep = y > 0
    elif subset == "overcount":
        keep = y < 0
    else:
        keep = np.ones(y.size, dtype=bool)
    y = y[keep]
    d = d[np.ix_(keep, keep)]
    n = y.size
    if n < 2:
        raise SubsetTooSmall(f"subset {subset!r} has {n} area(s); need at least 2")
    iu = np.triu_indices(n, k=1)
    pts = np.column_stack([d[iu], (y[:, None] - y[None, :])[iu] ** 2])
    return VariogramCloud(points=pts, subset_label=subset)


def morans_i(rates, weights) -> MoranResult:
    """Global spatial autocorrelation with moments under the normality null.

    I = (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2 with z centered
    rates.  E(I) = -1/(n-1) exactly; the variance uses the classical
    normality-assumption moments and the p-value is two-sided from the
    normal approximation.  For n == 2 the variance formula degenerates
    (I is identically -1 there), so sd and p are reported as NaN.
    """
    y = np.asarray(rates, float)
    w = np.asarray(weights, float)
    n = y.size
    if w.shape != (n, n):
        raise DimensionMismatch(f"weights {w.shape} do not match {n} rates")
    if np.any(np.diag(w) != 0):
        raise ValueError("weight matrix must have a zero diagonal")
    z = y - y.mean()
    z2 = float(z @ z)
    if z2 == 0:
        raise DegenerateRates("all rates equal; Moran's I is undefined")

    s0 = float(w.sum())
    i_stat = (n / s0) * float(z @ w @ z) / z2
    e_i = -1.0 / (n - 1)

    if n < 3:
        return MoranResult(I=i_stat, expected_I=e_i, sd_I=float("nan"), p_value=float("nan"))

    s1 = 0.5 * float(((w + w.T) ** 2).sum())
    s2 = float(((w.sum(axis=1) + w.sum(axis=0)) ** 2).sum())
    var_i = (n * n * s1 - n * s2 + 3.0 * s0 * s0) / ((n - 1) * (n + 1) * s0 * s0) - e_i * e_i
    sd_i = float(np.sqrt(var_i))
    zscore = (i_stat - e_i) / sd_i
    # clamp away from exact zero so the (0, 1] contract survives underflow
    p = max(2.0 * float(stats.norm.sf(abs(zscore))), 5e-324)
    return MoranResult(I=i_stat, expected_I=e_i, sd_I=sd_i, p_value=p)
