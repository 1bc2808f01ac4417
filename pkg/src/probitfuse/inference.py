"""Posterior inference from annotation patterns.

The likelihood of an observed pattern under each true class is the
probability of the matching signed orthant of the class-conditional
latent normal; missing annotators are marginalized out exactly by
dropping their dimensions.  Bayes' rule with a prevalence prior then
gives the per-record posterior.
"""

from __future__ import annotations

import warnings

import numpy as np

from .annotations import EXPERT, MISSING, NON_EXPERT, POSITIVE, AnnotationPattern
from .calibration import AnnotatorProfile, CorrelationStructure
from .errors import DomainError
from .numerics import ABOVE, BELOW, OrthantSpec, mvn_orthant_prob

LIKELIHOOD_FLOOR = 1e-300

__all__ = [
    "PatternLikelihoodCache",
    "company_posteriors",
    "pattern_likelihood",
    "posterior_prob",
    "realize_headcount",
]


def _check_alignment(pattern: AnnotationPattern, profiles, structure: CorrelationStructure):
    if len(pattern) != len(profiles) or len(pattern) != structure.dim:
        raise DomainError(
            f"pattern ({len(pattern)}), profiles ({len(profiles)}) and structure "
            f"({structure.dim}) must share the panel dimension"
        )


def pattern_likelihood(pattern: AnnotationPattern, label: int,
                       profiles: tuple[AnnotatorProfile, ...] | list[AnnotatorProfile],
                       structure: CorrelationStructure, seed: int,
                       accuracy: float = 1e-3) -> float:
    """P(pattern | label) as a signed-orthant probability.

    ``label`` is EXPERT (1) or NON_EXPERT (0).  Missing annotators are
    dropped (exact marginalization); an all-missing pattern is an error.
    """
    if label not in (EXPERT, NON_EXPERT):
        raise DomainError(f"label must be {EXPERT} or {NON_EXPERT}, got {label!r}")
    _check_alignment(pattern, profiles, structure)
    observed = np.flatnonzero(pattern.observed)
    if observed.size == 0:
        raise DomainError("pattern has no observed annotations")
    thresholds = np.array([profiles[j].tau(label) for j in observed])
    signs = tuple(
        ABOVE if pattern.values[j] == POSITIVE else BELOW for j in observed
    )
    sub = structure.matrix(label).restrict(observed)
    spec = OrthantSpec(thresholds, signs, accuracy)
    return mvn_orthant_prob(spec, sub, seed)


def posterior_prob(pattern: AnnotationPattern, prevalence: float,
                   profiles, structure: CorrelationStructure, seed: int,
                   accuracy: float = 1e-3) -> float:
    """Posterior probability of true expertise given the pattern."""
    if not (0.0 < prevalence < 1.0):
        raise DomainError(f"prevalence must lie strictly in (0, 1), got {prevalence!r}")
    l_pos = max(pattern_likelihood(pattern, EXPERT, profiles, structure, seed, accuracy),
                LIKELIHOOD_FLOOR)
    l_neg = max(pattern_likelihood(pattern, NON_EXPERT, profiles, structure, seed, accuracy),
                LIKELIHOOD_FLOOR)
    return prevalence * l_pos / (prevalence * l_pos + (1.0 - prevalence) * l_neg)


class PatternLikelihoodCache:
    """Memoized pattern likelihoods for one (profiles, structure, seed).

    At most 3^panel distinct patterns exist, so memoization makes repeated
    company-level scoring cheap.  Values are identical to fresh
    computation because the integrator is deterministic per seed.
    """

    def __init__(self, profiles, structure: CorrelationStructure, seed: int,
                 accuracy: float = 1e-3):
        self.profiles = tuple(profiles)
        self.structure = structure
        self.seed = seed
        self.accuracy = accuracy
        self._store: dict[tuple[bytes, int], float] = {}

    def likelihood(self, pattern: AnnotationPattern, label: int) -> float:
        key = (pattern.key(), label)
        value = self._store.get(key)
        if value is None:
            value = pattern_likelihood(pattern, label, self.profiles, self.structure,
                                       self.seed, self.accuracy)
            self._store[key] = value
        return value

    def posterior(self, pattern: AnnotationPattern, prevalence: float) -> float:
        l_pos = max(self.likelihood(pattern, EXPERT), LIKELIHOOD_FLOOR)
        l_neg = max(self.likelihood(pattern, NON_EXPERT), LIKELIHOOD_FLOOR)
        return prevalence * l_pos / (prevalence * l_pos + (1.0 - prevalence) * l_neg)


def company_posteriors(employees, prevalence: float, profiles,
                       structure: CorrelationStructure, seed: int,
                       accuracy: float = 1e-3,
                       cache: PatternLikelihoodCache | None = None) -> np.ndarray:
    """Posterior per employee, memoizing identical patterns.

    Employees whose pattern is entirely missing fall back to the prior
    prevalence; a warning reports how many were imputed this way.
    """
    employees = list(employees)
    if not employees:
        raise DomainError("employee list must be nonempty")
    if not (0.0 < prevalence < 1.0):
        raise DomainError(f"prevalence must lie strictly in (0, 1), got {prevalence!r}")
    if cache is None:
        cache = PatternLikelihoodCache(profiles, structure, seed, accuracy)
    out = np.empty(len(employees))
    n_fallback = 0
    for i, pattern in enumerate(employees):
        if pattern.n_observed == 0:
            out[i] = prevalence
            n_fallback += 1
        else:
            out[i] = cache.posterior(pattern, prevalence)
    if n_fallback:
        warnings.warn(
            f"{n_fallback} of {len(employees)} employees have no annotations; "
            "assigned the prior prevalence",
            stacklevel=2,
        )
    return out


def realize_headcount(posteriors, rng: np.random.Generator) -> int:
    """One Bernoulli realization of the total expert count."""
    p = np.asarray(posteriors, dtype=float)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise DomainError("posteriors must lie in [0, 1]")
    return int(np.count_nonzero(rng.random(p.size) < p))
