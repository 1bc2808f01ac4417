"""Ground-truth simulation harness.

Populations are generated from the same latent threshold model that the
inference module assumes, so estimation error observed here is numerical
or statistical, never model misspecification.  The scoreboard grades a
set of estimates against the generated truth and compares the fused
estimator with each individual annotator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import EXPERT, NON_EXPERT, AnnotationPattern, ValidationSet
from .calibration import (
    AnnotatorProfile,
    CorrelationStructure,
    build_correlation_structure,
    diagnostic_metrics,
    estimate_confusion,
    fused_confusion,
)
from .errors import DomainError
from .inference import PatternLikelihoodCache
from .numerics import CorrelationMatrix, cholesky_lower, nearest_correlation
from .streams import stream_seed, substream

__all__ = [
    "GeneratedPopulation",
    "Scoreboard",
    "SimulatedCompany",
    "SimulationScenario",
    "generate_population",
    "scoreboard",
]

# validation mix defaults mirror an enriched gold set: experts are
# oversampled relative to typical company prevalence
DEFAULT_N_VALIDATION = 585
DEFAULT_VALIDATION_PREVALENCE = 153 / 585


@dataclass(frozen=True)
class SimulationScenario:
    """Known-truth scenario: population sizes, prevalence, and panel."""

    n_companies: int
    employees_range: tuple[int, int]
    true_prevalence: float
    profiles: tuple[AnnotatorProfile, ...]
    structure: CorrelationStructure
    seed: int = 0
    n_validation: int = DEFAULT_N_VALIDATION
    validation_prevalence: float = DEFAULT_VALIDATION_PREVALENCE

    def __post_init__(self):
        if self.n_companies < 1:
            raise DomainError("n_companies must be at least 1")
        lo, hi = self.employees_range
        if not (1 <= lo <= hi):
            raise DomainError("employees_range must satisfy 1 <= min <= max")
        # prevalence 0 is allowed so all-negative populations can be simulated
        if not (0.0 <= self.true_prevalence < 1.0):
            raise DomainError("true_prevalence must lie in [0, 1)")
        if not (0.0 < self.validation_prevalence < 1.0):
            raise DomainError("validation_prevalence must lie strictly in (0, 1)")
        if self.n_validation < 2:
            raise DomainError("n_validation must be at least 2")
        profiles = tuple(self.profiles)
        if not profiles:
            raise DomainError("at least one annotator profile is required")
        panel = tuple(p.annotator_id for p in profiles)
        if panel != self.structure.panel:
            raise DomainError("profiles and structure must list the same panel in order")
        object.__setattr__(self, "profiles", profiles)
        object.__setattr__(self, "employees_range", (int(lo), int(hi)))

    @property
    def panel(self) -> tuple[str, ...]:
        return self.structure.panel


@dataclass(frozen=True)
class SimulatedCompany:
    company_id: str
    patterns: tuple[AnnotationPattern, ...]
    true_count: int

    @property
    def n_employees(self) -> int:
        return len(self.patterns)


@dataclass(frozen=True)
class GeneratedPopulation:
    validation: ValidationSet
    companies: tuple[SimulatedCompany, ...]


def _draw_annotations(scenario: SimulationScenario, labels: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Threshold correlated latent scores at the class cut points."""
    n = labels.size
    k = len(scenario.panel)
    codes = np.empty((n, k), dtype=np.int8)
    for label in (EXPERT, NON_EXPERT):
        mask = labels == label
        m = int(np.count_nonzero(mask))
        if m == 0:
            continue
        factor = cholesky_lower(scenario.structure.matrix(label))
        latent = rng.standard_normal((m, k)) @ factor.T
        taus = np.array([p.tau(label) for p in scenario.profiles])
        codes[mask] = (latent > taus).astype(np.int8)
    return codes


def generate_population(scenario: SimulationScenario) -> GeneratedPopulation:
    """Gold validation data plus per-company employee patterns.

    Deterministic for a fixed scenario seed.
    """
    rng_val = substream(scenario.seed, "sim", "validation")
    gold = (rng_val.random(scenario.n_validation) < scenario.validation_prevalence).astype(np.int8)
    # guarantee both classes so downstream calibration is well posed
    if not gold.any():
        gold[0] = EXPERT
    if gold.all():
        gold[0] = NON_EXPERT
    annotations = _draw_annotations(scenario, gold, rng_val)
    validation = ValidationSet(
        record_ids=tuple(f"v{i}" for i in range(scenario.n_validation)),
        gold=gold,
        panel=scenario.panel,
        annotations=annotations,
    )

    lo, hi = scenario.employees_range
    companies = []
    for c in range(scenario.n_companies):
        rng_c = substream(scenario.seed, "sim", "company", c)
        n_employees = int(rng_c.integers(lo, hi + 1))
        labels = (rng_c.random(n_employees) < scenario.true_prevalence).astype(np.int8)
        codes = _draw_annotations(scenario, labels, rng_c)
        companies.append(SimulatedCompany(
            company_id=f"sim{c:03d}",
            patterns=tuple(AnnotationPattern(row) for row in codes),
            true_count=int(labels.sum()),
        ))
    return GeneratedPopulation(validation, tuple(companies))


@dataclass(frozen=True)
class Scoreboard:
    """Truth-referenced evaluation of a set of estimates."""

    rows: tuple[dict, ...]
    coverage: float
    q50_median_abs_error: float
    fused_accuracy: float
    individual_accuracies: dict[str, float]

    @property
    def best_individual_accuracy(self) -> float:
        return max(self.individual_accuracies.values())

    @property
    def fused_beats_all_individual(self) -> bool:
        return self.fused_accuracy >= self.best_individual_accuracy


def scoreboard(scenario: SimulationScenario, estimates, accuracy: float = 1e-3) -> Scoreboard:
    """Grade estimates against the scenario's regenerated ground truth.

    Reports 80%-interval coverage of the true counts, the median absolute
    error of q50, and fused-vs-individual accuracy on the validation data.
    Estimates must align one-to-one with the scenario's companies.
    """
    estimates = list(estimates)
    if not estimates:
        raise DomainError("estimates must be nonempty")
    population = generate_population(scenario)
    truth_by_id = {c.company_id: c for c in population.companies}
    if [e.company_id for e in estimates] != [c.company_id for c in population.companies]:
        raise DomainError("estimates must align with the scenario's companies")

    rows = []
    covered = 0
    errors = []
    for estimate in estimates:
        company = truth_by_id[estimate.company_id]
        hit = estimate.q10 <= company.true_count <= estimate.q90
        covered += int(hit)
        errors.append(abs(estimate.q50 - company.true_count))
        rows.append({
            "company_id": company.company_id,
            "n_employees": company.n_employees,
            "true_count": company.true_count,
            "q10": estimate.q10,
            "q50": estimate.q50,
            "q90": estimate.q90,
            "covered": hit,
            "abs_error_q50": abs(estimate.q50 - company.true_count),
        })

    validation = population.validation
    profiles = tuple(estimate_confusion(validation, a) for a in validation.panel)
    structure = build_correlation_structure(validation, validation.panel)
    prevalence = validation.n_expert / validation.n_records
    cache = PatternLikelihoodCache(profiles, structure,
                                   stream_seed(scenario.seed, "scoreboard"), accuracy)
    posteriors = np.array([
        cache.posterior(validation.pattern(i), prevalence)
        for i in range(validation.n_records)
    ])
    fused = fused_confusion(validation, posteriors, 0.5)
    individual = {
        p.annotator_id: diagnostic_metrics(p, validation.n_expert, validation.n_non_expert).accuracy
        for p in profiles
    }

    return Scoreboard(
        rows=tuple(rows),
        coverage=covered / len(estimates),
        q50_median_abs_error=float(np.median(errors)),
        fused_accuracy=fused.accuracy,
        individual_accuracies=individual,
    )


def equicorrelated_structure(panel, rho: float) -> CorrelationStructure:
    """Both class matrices equicorrelated at rho (convenience for scenarios)."""
    k = len(panel)
    m = np.full((k, k), float(rho))
    np.fill_diagonal(m, 1.0)
    matrix = nearest_correlation(CorrelationMatrix(m))
    return CorrelationStructure(tuple(panel), matrix, matrix)


def default_panel() -> tuple[AnnotatorProfile, ...]:
    """Six stand-in annotators: three keyword filters, three LLM raters."""
    rates = [
        ("kw_broad_strict", 0.55, 0.995),
        ("kw_strict", 0.45, 0.990),
        ("kw_broad", 0.70, 0.970),
        ("llm_a", 0.75, 0.960),
        ("llm_b", 0.72, 0.965),
        ("llm_c", 0.80, 0.950),
    ]
    return tuple(AnnotatorProfile.from_rates(*r) for r in rates)


def scenario_from_dict(raw: dict, fallback_seed: int = 0) -> SimulationScenario:
    """Build a scenario from its JSON form, naming any invalid field."""
    from .errors import ConfigError

    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object")

    def field(name, default=None, required=False):
        if name in raw:
            return raw[name]
        if required:
            raise ConfigError(f"scenario field {name!r} is required")
        return default

    annotators = field("annotators")
    if annotators is None:
        profiles = default_panel()
    else:
        try:
            profiles = tuple(
                AnnotatorProfile.from_rates(
                    a["annotator_id"], a["sensitivity"], a["specificity"]
                )
                for a in annotators
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"scenario field 'annotators': entries need "
                              f"annotator_id/sensitivity/specificity ({exc})") from exc
        except DomainError as exc:
            raise ConfigError(f"scenario field 'annotators': {exc}") from exc
    panel = tuple(p.annotator_id for p in profiles)

    correlation = field("correlation", 0.0)
    try:
        if isinstance(correlation, dict):
            structure = CorrelationStructure(
                panel,
                nearest_correlation(CorrelationMatrix(np.array(correlation["r_pos"], float))),
                nearest_correlation(CorrelationMatrix(np.array(correlation["r_neg"], float))),
            )
        else:
            structure = equicorrelated_structure(panel, float(correlation))
    except (KeyError, TypeError, ValueError, DomainError) as exc:
        raise ConfigError(f"scenario field 'correlation': {exc}") from exc

    def checked(name, value):
        try:
            return value()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario field {name!r}: {exc}") from exc

    kwargs = dict(
        n_companies=checked("n_companies", lambda: int(field("n_companies", required=True))),
        employees_range=(
            checked("employees_min", lambda: int(field("employees_min", required=True))),
            checked("employees_max", lambda: int(field("employees_max", required=True))),
        ),
        true_prevalence=checked("true_prevalence",
                                lambda: float(field("true_prevalence", required=True))),
        profiles=profiles,
        structure=structure,
        seed=checked("seed", lambda: int(field("seed", fallback_seed))),
    )
    if "n_validation" in raw:
        kwargs["n_validation"] = checked("n_validation", lambda: int(raw["n_validation"]))
    if "validation_prevalence" in raw:
        kwargs["validation_prevalence"] = checked(
            "validation_prevalence", lambda: float(raw["validation_prevalence"]))
    try:
        return SimulationScenario(**kwargs)
    except DomainError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_scenario(path, fallback_seed: int = 0) -> SimulationScenario:
    """Scenario from a JSON file (same format family as the priors config)."""
    import json

    from .errors import ConfigError

    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(raw, fallback_seed)
