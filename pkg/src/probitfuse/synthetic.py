"""Synthetic employee-level annotations from aggregate keyword counts.

A Gaussian copula draws correlated latent scores, thresholds them at the
probit quantiles matching each filter's company-level prevalence, and
marks annotators without aggregate counts as missing.  Headcount draws
produced from synthetic data are scaled by a calibrated adjustment
factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .annotations import MISSING, NEGATIVE, POSITIVE, AnnotationPattern
from .calibration import CorrelationStructure
from .errors import DomainError
from .numerics import cholesky_lower

__all__ = [
    "AggregateCounts",
    "SyntheticConfig",
    "adjust_headcount_draws",
    "copula_generate",
]


@dataclass(frozen=True)
class AggregateCounts:
    """Aggregate keyword-filter hit counts for one company.

    Counts exceeding the total headcount (possible with rounded platform
    counts) are normalized down to the headcount with a warning.
    """

    company_id: str
    total_headcount: int
    filter_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not str(self.company_id):
            raise DomainError("company_id must be nonempty")
        total = int(self.total_headcount)
        if total <= 0:
            raise DomainError("total_headcount must be positive")
        if not self.filter_counts:
            raise DomainError("at least one filter count is required")
        counts = {}
        for name, count in self.filter_counts.items():
            c = int(count)
            if c < 0:
                raise DomainError(f"filter {name!r} has a negative count")
            if c > total:
                warnings.warn(
                    f"company {self.company_id!r}: filter {name!r} count {c} exceeds "
                    f"headcount {total}; clamped",
                    stacklevel=3,
                )
                c = total
            counts[str(name)] = c
        object.__setattr__(self, "company_id", str(self.company_id))
        object.__setattr__(self, "total_headcount", total)
        object.__setattr__(self, "filter_counts", counts)

    def prevalence(self, name: str) -> float:
        return self.filter_counts[name] / self.total_headcount


@dataclass(frozen=True)
class SyntheticConfig:
    """Adjustment factor and seed for the synthetic estimation path."""

    adjustment: float = 0.5
    copula_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.adjustment <= 1.0):
            raise DomainError("adjustment must lie in (0, 1]")


def _copula_codes(agg: AggregateCounts, structure: CorrelationStructure, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    available = [a for a in structure.panel if a in agg.filter_counts]
    if not available:
        raise DomainError(
            f"company {agg.company_id!r} has no filters matching the panel {structure.panel}"
        )
    idx = [structure.panel.index(a) for a in available]
    sub = structure.r_neg.restrict(idx)
    factor = cholesky_lower(sub)

    # per-filter probit cut points; p=0 -> +inf (all negative), p=1 -> -inf
    cuts = np.empty(len(available))
    for pos, name in enumerate(available):
        p = agg.prevalence(name)
        if p <= 0.0:
            cuts[pos] = np.inf
        elif p >= 1.0:
            cuts[pos] = -np.inf
        else:
            cuts[pos] = ndtri(1.0 - p)

    latent = rng.standard_normal((n, len(available))) @ factor.T
    codes = np.full((n, structure.dim), MISSING, dtype=np.int8)
    for pos, j in enumerate(idx):
        codes[:, j] = np.where(latent[:, pos] > cuts[pos], POSITIVE, NEGATIVE)
    return codes


def copula_generate(agg: AggregateCounts, structure: CorrelationStructure, n: int,
                    rng: np.random.Generator) -> list[AnnotationPattern]:
    """n synthetic annotation patterns matching the company's prevalences.

    The latent draw uses the non-expert-class correlation matrix restricted
    to the filters with aggregate counts; all other panel annotators come
    back missing.
    """
    if n <= 0:
        raise DomainError("n must be positive")
    codes = _copula_codes(agg, structure, n, rng)
    return [AnnotationPattern(row) for row in codes]


def adjust_headcount_draws(draws, config: SyntheticConfig) -> np.ndarray:
    """Scale draws by the synthetic adjustment, rounding half-up."""
    d = np.asarray(draws)
    if d.size and d.min() < 0:
        raise DomainError("draws must be nonnegative")
    return np.floor(d * config.adjustment + 0.5).astype(np.int64)
