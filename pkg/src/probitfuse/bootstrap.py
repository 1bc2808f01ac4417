"""Five-source bootstrap for company-level headcount estimates.

Each iteration resamples the validation data (confusion and correlation
uncertainty), draws a prevalence from the company's Beta prior, resamples
the company's employees (or regenerates synthetic ones), and realizes
true labels as Bernoulli draws.  Summaries report the mean and the
10th/50th/90th nearest-rank percentiles of the iteration draws, plus a
confidence category.

The validation resample stream is shared across companies within an
iteration, so portfolio aggregation carries the common calibration
uncertainty; prior, employee, copula, and realization streams are
per-company.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annotations import AnnotationPattern, ValidationSet
from .calibration import build_correlation_structure, estimate_confusion
from .errors import CalibrationError, ConfigError, DomainError
from .inference import PatternLikelihoodCache, realize_headcount
from .streams import stream_seed, substream
from .synthetic import AggregateCounts, SyntheticConfig, _copula_codes, adjust_headcount_draws

ORG_TYPES = ("consulting_or_ml", "non_ml", "unknown")
SIZE_BANDS = ("lt100", "100to1k", "1kto10k", "gte10k", "unknown")
ANY_BAND = "any"

CATEGORIES = ("Probable", "Possible", "NonZero", "NotDetected")
METHODS = ("real", "synthetic", "mixed")

MAX_CALIBRATION_RETRIES = 10
_PREVALENCE_EPS = 1e-12

__all__ = [
    "BootstrapConfig",
    "CompanyPatterns",
    "EstimateSummary",
    "PriorSpec",
    "aggregate_portfolio",
    "classify",
    "default_priors",
    "estimate_companies",
    "run_company_estimate",
    "select_prior",
    "size_band_for",
]


@dataclass(frozen=True)
class PriorSpec:
    """Beta prevalence prior keyed by organization type and size band."""

    org_type: str
    size_band: str
    alpha: float
    beta: float

    def __post_init__(self):
        if self.org_type not in ORG_TYPES:
            raise ConfigError(f"unknown org_type {self.org_type!r}; expected one of {ORG_TYPES}")
        if self.size_band not in SIZE_BANDS + (ANY_BAND,):
            raise ConfigError(
                f"unknown size_band {self.size_band!r}; expected one of {SIZE_BANDS + (ANY_BAND,)}"
            )
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ConfigError("alpha and beta must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def default_priors() -> list[PriorSpec]:
    """Company-size-stratified Beta priors on expert prevalence."""
    return [
        PriorSpec("consulting_or_ml", "lt100", 2.4, 21.7),
        PriorSpec("consulting_or_ml", "100to1k", 3.0, 57.0),
        PriorSpec("consulting_or_ml", "1kto10k", 1.6, 154.8),
        PriorSpec("consulting_or_ml", "gte10k", 1.0, 999.0),
        PriorSpec("non_ml", ANY_BAND, 1.0, 9999.0),
        PriorSpec("unknown", "unknown", 1.6, 154.8),
    ]


def size_band_for(headcount: int | None) -> str:
    """Size band for a reported headcount; boundaries go to the larger band."""
    if headcount is None:
        return "unknown"
    if headcount < 100:
        return "lt100"
    if headcount < 1000:
        return "100to1k"
    if headcount < 10000:
        return "1kto10k"
    return "gte10k"


def select_prior(priors, org_type: str, size_band: str) -> PriorSpec:
    """Prior lookup: exact (org, band), then the org's any-band row, then
    the unknown/unknown fallback row."""
    if org_type not in ORG_TYPES:
        raise DomainError(f"unknown org_type {org_type!r}")
    if size_band not in SIZE_BANDS:
        raise DomainError(f"unknown size_band {size_band!r}")
    by_key = {(p.org_type, p.size_band): p for p in priors}
    for key in ((org_type, size_band), (org_type, ANY_BAND), ("unknown", "unknown")):
        if key in by_key:
            return by_key[key]
    raise ConfigError(f"no prior configured for ({org_type}, {size_band})")


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap run parameters.

    Quantile levels are fixed at 10/50/90; ``accuracy`` is the absolute
    error target of the orthant integrator used inside each iteration.
    """

    iterations: int = 1000
    seed: int = 0
    min_class_count: int = 30
    accuracy: float = 1e-3

    QUANTILES = (0.10, 0.50, 0.90)

    def __post_init__(self):
        if self.iterations < 1:
            raise DomainError("iterations must be at least 1")
        if not (0.0 < self.accuracy <= 0.1):
            raise DomainError("accuracy must lie in (0, 0.1]")
        if self.min_class_count < 1:
            raise DomainError("min_class_count must be at least 1")


@dataclass(frozen=True)
class CompanyPatterns:
    """Real employee-level annotations for one company."""

    company_id: str
    patterns: tuple[AnnotationPattern, ...]

    def __post_init__(self):
        if not str(self.company_id):
            raise DomainError("company_id must be nonempty")
        patterns = tuple(self.patterns)
        if not patterns:
            raise DomainError("company must have at least one employee")
        widths = {len(p) for p in patterns}
        if len(widths) != 1:
            raise DomainError("all employee patterns must share the panel width")
        object.__setattr__(self, "company_id", str(self.company_id))
        object.__setattr__(self, "patterns", patterns)

    @property
    def n_employees(self) -> int:
        return len(self.patterns)


def classify(q10: int, q50: int, q90: int) -> str:
    """Confidence category from the quantile triple."""
    if not (0 <= q10 <= q50 <= q90):
        raise DomainError(f"quantiles must satisfy 0 <= q10 <= q50 <= q90, got {(q10, q50, q90)}")
    if q10 > 0:
        return "Probable"
    if q50 > 0:
        return "Possible"
    if q90 > 0:
        return "NonZero"
    return "NotDetected"


@dataclass(frozen=True)
class EstimateSummary:
    """Bootstrap summary of one company's headcount distribution."""

    company_id: str
    n_employees: int
    mean: float
    q10: int
    q50: int
    q90: int
    category: str
    method: str

    def __post_init__(self):
        if not (0 <= self.q10 <= self.q50 <= self.q90 <= self.n_employees):
            raise DomainError(
                f"quantiles must satisfy 0 <= q10 <= q50 <= q90 <= n_employees, "
                f"got {(self.q10, self.q50, self.q90, self.n_employees)}"
            )
        if not (0.0 <= self.mean <= self.n_employees):
            raise DomainError("mean must lie within [0, n_employees]")
        if self.category != classify(self.q10, self.q50, self.q90):
            raise DomainError(f"category {self.category!r} is inconsistent with the quantiles")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")


def _nearest_rank(sorted_draws: np.ndarray, level: float) -> int:
    rank = max(1, math.ceil(level * sorted_draws.size))
    return int(sorted_draws[rank - 1])


def summarize_draws(company_id: str, n_employees: int, draws, method: str) -> EstimateSummary:
    """Mean and nearest-rank quantile summary of integer draws."""
    d = np.sort(np.asarray(draws, dtype=np.int64))
    if d.size == 0:
        raise DomainError("draws must be nonempty")
    q10, q50, q90 = (_nearest_rank(d, level) for level in BootstrapConfig.QUANTILES)
    return EstimateSummary(
        company_id=company_id,
        n_employees=int(n_employees),
        mean=float(d.mean()),
        q10=q10,
        q50=q50,
        q90=q90,
        category=classify(q10, q50, q90),
        method=method,
    )


def _calibrate_iteration(validation: ValidationSet, config: BootstrapConfig, iteration: int):
    """Resampled profiles/structure for one iteration, with retries.

    A resample can lose an entire gold class or an annotator's coverage;
    such draws are retried with a fresh substream up to
    MAX_CALIBRATION_RETRIES times.
    """
    for attempt in range(MAX_CALIBRATION_RETRIES):
        rng = substream(config.seed, "calibration", iteration, attempt)
        try:
            resampled = validation.resample(rng)
            profiles = tuple(estimate_confusion(resampled, a) for a in validation.panel)
            structure = build_correlation_structure(resampled, validation.panel,
                                                    config.min_class_count)
        except (CalibrationError, DomainError):
            continue
        qmc_seed = stream_seed(config.seed, "orthant", iteration, attempt)
        return profiles, structure, qmc_seed
    raise CalibrationError(
        f"calibration failed for {MAX_CALIBRATION_RETRIES} consecutive resamples "
        f"at iteration {iteration}"
    )


def _posteriors_for_codes(codes: np.ndarray, prevalence: float,
                          cache: PatternLikelihoodCache) -> np.ndarray:
    """Posterior per row of an annotation-code matrix.

    Rows are deduplicated before scoring; all-missing rows fall back to
    the prior prevalence (the public company_posteriors fallback rule).
    """
    unique, inverse = np.unique(codes, axis=0, return_inverse=True)
    posteriors = np.empty(unique.shape[0])
    for u in range(unique.shape[0]):
        pattern = AnnotationPattern(unique[u])
        if pattern.n_observed == 0:
            posteriors[u] = prevalence
        else:
            posteriors[u] = cache.posterior(pattern, prevalence)
    return posteriors[inverse]


def estimate_companies(companies, validation: ValidationSet, priors,
                       config: BootstrapConfig,
                       synth: SyntheticConfig | None = None):
    """Bootstrap all companies on a shared iteration/seed schedule.

    ``companies`` mixes CompanyPatterns (real path) and AggregateCounts
    (synthetic path); ``priors`` is the aligned list of PriorSpec.
    Returns (summaries, draw_matrix) where draw_matrix has shape
    (iterations, n_companies) and synthetic columns are already adjusted.
    """
    companies = list(companies)
    priors = list(priors)
    if not companies:
        raise DomainError("company list must be nonempty")
    if len(priors) != len(companies):
        raise DomainError("priors must align one-to-one with companies")
    synth = synth if synth is not None else SyntheticConfig()

    ids = [c.company_id for c in companies]
    if len(set(ids)) != len(ids):
        raise DomainError("company ids must be unique")
    is_synthetic = [isinstance(c, AggregateCounts) for c in companies]
    codes_by_company = [
        None if synthetic else np.stack([p.values for p in company.patterns])
        for synthetic, company in zip(is_synthetic, companies)
    ]
    panel_width = len(validation.panel)
    for company, codes in zip(companies, codes_by_company):
        if codes is not None and codes.shape[1] != panel_width:
            raise DomainError(
                f"company {company.company_id!r} patterns have width {codes.shape[1]}, "
                f"panel expects {panel_width}"
            )

    draws = np.zeros((config.iterations, len(companies)), dtype=np.int64)
    for iteration in range(config.iterations):
        profiles, structure, qmc_seed = _calibrate_iteration(validation, config, iteration)
        cache = PatternLikelihoodCache(profiles, structure, qmc_seed, config.accuracy)
        for ci, (company, prior) in enumerate(zip(companies, priors)):
            cid = company.company_id
            rng_prior = substream(config.seed, "prior", iteration, cid)
            prevalence = float(np.clip(rng_prior.beta(prior.alpha, prior.beta),
                                       _PREVALENCE_EPS, 1.0 - _PREVALENCE_EPS))
            if is_synthetic[ci]:
                rng_copula = substream(config.seed, "copula", iteration, cid)
                codes = _copula_codes(company, structure, company.total_headcount, rng_copula)
            else:
                rng_employees = substream(config.seed, "employees", iteration, cid)
                base = codes_by_company[ci]
                codes = base[rng_employees.integers(0, base.shape[0], base.shape[0])]
            posteriors = _posteriors_for_codes(codes, prevalence, cache)
            rng_realize = substream(config.seed, "realize", iteration, cid)
            draws[iteration, ci] = realize_headcount(posteriors, rng_realize)

    summaries = []
    for ci, company in enumerate(companies):
        if is_synthetic[ci]:
            draws[:, ci] = adjust_headcount_draws(draws[:, ci], synth)
            n_employees = company.total_headcount
            method = "synthetic"
        else:
            n_employees = company.n_employees
            method = "real"
        summaries.append(summarize_draws(company.company_id, n_employees,
                                         draws[:, ci], method))
    return summaries, draws


def run_company_estimate(company, validation: ValidationSet, prior: PriorSpec,
                         config: BootstrapConfig,
                         synth: SyntheticConfig | None = None) -> EstimateSummary:
    """Bootstrap a single company (real patterns or aggregate counts)."""
    summaries, _ = estimate_companies([company], validation, [prior], config, synth)
    return summaries[0]


def aggregate_portfolio(per_company_draw_matrix, n_employees: int | None = None,
                        company_id: str = "AGGREGATE",
                        method: str = "real") -> EstimateSummary:
    """Iteration-aligned portfolio total: sum draws within each iteration,
    then summarize the summed distribution."""
    if isinstance(per_company_draw_matrix, (list, tuple)):
        lengths = {np.asarray(col).shape for col in per_company_draw_matrix}
        if len(lengths) > 1:
            raise DomainError("draw columns must share the iteration count")
        matrix = np.column_stack([np.asarray(col) for col in per_company_draw_matrix])
    else:
        matrix = np.asarray(per_company_draw_matrix)
    if matrix.ndim != 2 or matrix.size == 0:
        raise DomainError("draw matrix must be 2-D (iterations x companies) and nonempty")
    totals = matrix.sum(axis=1)
    if n_employees is None:
        n_employees = int(totals.max())
    return summarize_draws(company_id, n_employees, totals, method)
