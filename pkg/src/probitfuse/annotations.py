"""Binary annotation codes and panel-aligned data containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

POSITIVE = 1
NEGATIVE = 0
MISSING = -1

EXPERT = 1
NON_EXPERT = 0

_VALID_CODES = frozenset({POSITIVE, NEGATIVE, MISSING})


@dataclass(frozen=True)
class AnnotationPattern:
    """One record's labels across the annotator panel.

    ``values[j]`` is 1 (positive), 0 (negative) or -1 (missing) for the
    j-th panel annotator.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.array(self.values, dtype=np.int8))
        if v.ndim != 1 or v.size == 0:
            raise DomainError("annotation pattern must be a nonempty vector")
        if not set(np.unique(v)).issubset(_VALID_CODES):
            raise DomainError("annotation values must be 1, 0, or -1 (missing)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def observed(self) -> np.ndarray:
        """Boolean mask of non-missing entries."""
        return self.values != MISSING

    @property
    def n_observed(self) -> int:
        return int(np.count_nonzero(self.observed))

    def key(self) -> bytes:
        """Hashable identity of the pattern (used by likelihood caches)."""
        return self.values.tobytes()


@dataclass(frozen=True)
class ValidationSet:
    """Gold-labeled records, column-aligned to an annotator panel.

    gold[i] is 1 for a true expert and 0 otherwise; annotations[i, j] uses
    the POSITIVE/NEGATIVE/MISSING codes for panel annotator j.
    """

    record_ids: tuple[str, ...]
    gold: np.ndarray
    panel: tuple[str, ...]
    annotations: np.ndarray

    def __post_init__(self):
        ids = tuple(str(r) for r in self.record_ids)
        if len(ids) == 0:
            raise DomainError("validation set must contain records")
        if len(set(ids)) != len(ids):
            raise DomainError("record_ids must be unique")
        panel = tuple(str(a) for a in self.panel)
        if len(panel) == 0 or len(set(panel)) != len(panel):
            raise DomainError("panel must be nonempty with unique annotator ids")
        gold = np.array(self.gold, dtype=np.int8)
        if gold.shape != (len(ids),):
            raise DomainError("gold labels must align with record_ids")
        if not set(np.unique(gold)).issubset({EXPERT, NON_EXPERT}):
            raise DomainError("gold labels must be 1 (expert) or 0 (non-expert)")
        if not (np.any(gold == EXPERT) and np.any(gold == NON_EXPERT)):
            raise DomainError("validation set needs at least one record per gold class")
        ann = np.array(self.annotations, dtype=np.int8)
        if ann.shape != (len(ids), len(panel)):
            raise DomainError("annotations must be records x panel")
        if not set(np.unique(ann)).issubset(_VALID_CODES):
            raise DomainError("annotation values must be 1, 0, or -1 (missing)")
        gold.setflags(write=False)
        ann.setflags(write=False)
        object.__setattr__(self, "record_ids", ids)
        object.__setattr__(self, "gold", gold)
        object.__setattr__(self, "panel", panel)
        object.__setattr__(self, "annotations", ann)

    @property
    def n_records(self) -> int:
        return len(self.record_ids)

    @property
    def n_expert(self) -> int:
        return int(np.count_nonzero(self.gold == EXPERT))

    @property
    def n_non_expert(self) -> int:
        return int(np.count_nonzero(self.gold == NON_EXPERT))

    def pattern(self, index: int) -> AnnotationPattern:
        return AnnotationPattern(self.annotations[index])

    def resample(self, rng: np.random.Generator) -> "ValidationSet":
        """Bootstrap resample of the records (with replacement).

        Resampled record ids carry a positional suffix to stay unique.
        """
        idx = rng.integers(0, self.n_records, self.n_records)
        ids = tuple(f"{self.record_ids[i]}@{pos}" for pos, i in enumerate(idx))
        return ValidationSet(ids, self.gold[idx], self.panel, self.annotations[idx])
