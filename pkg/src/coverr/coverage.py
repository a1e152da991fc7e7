"""Arithmetic of census coverage-error quantities.

A census count C misses some people (undercount U) and counts some
people it should not (overcount O).  Gross error adds the two, net error
subtracts them, and the net error rate expresses the net relative to the
implied true population T = C + (U - O).  Quantities are real-valued so
the same arithmetic can serve rate-level synthetic data.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonPositiveTruePopulation


@dataclass(frozen=True)
class CoverageAccount:
    """One area's census count plus its two coverage-error components."""

    census_count: float
    undercount: float
    overcount: float

    def __post_init__(self):
        if self.census_count < 0:
            raise ValueError(f"census_count must be >= 0, got {self.census_count}")
        if self.undercount < 0:
            raise ValueError(f"undercount must be >= 0, got {self.undercount}")
        if self.overcount < 0:
            raise ValueError(f"overcount must be >= 0, got {self.overcount}")

    @property
    def true_population(self) -> float:
        return self.census_count + net_error(self)


def gross_error(account: CoverageAccount) -> float:
    """Total persons affected by coverage error: undercount + overcount."""
    return account.undercount + account.overcount


def net_error(account: CoverageAccount) -> float:
    """Undercount minus overcount.

    Positive means net undercount, negative means net overcount.
    """
    return account.undercount - account.overcount


def net_error_rate(account: CoverageAccount) -> float:
    """Net error as a percentage of the implied true population.

    Raises NonPositiveTruePopulation when C + N <= 0 (no rate exists).
    """
    n = net_error(account)
    t = account.census_count + n
    if t <= 0:
        raise NonPositiveTruePopulation(
            f"true population C + N = {t} is not positive "
            f"(C={account.census_count}, U={account.undercount}, O={account.overcount})"
        )
    return 100.0 * n / t
