import numpy as np
import pytest

from probitfuse import (
    AnnotationPattern,
    AnnotatorProfile,
    CorrelationMatrix,
    CorrelationStructure,
    ValidationSet,
)
from probitfuse.annotations import MISSING, NEGATIVE, POSITIVE


def make_validation(gold, annotations, panel=None):
    """ValidationSet from plain lists; None cells become missing."""
    gold = list(gold)
    rows = []
    for row in annotations:
        rows.append([MISSING if c is None else int(c) for c in row])
    panel = tuple(panel) if panel else tuple(f"a{j}" for j in range(len(rows[0])))
    ids = tuple(f"r{i}" for i in range(len(gold)))
    return ValidationSet(ids, gold, panel, rows)


def equicorrelated(dim, rho):
    m = np.full((dim, dim), float(rho))
    np.fill_diagonal(m, 1.0)
    return CorrelationMatrix(m)


@pytest.fixture
def small_panel():
    """Three moderately informative annotators with identity correlation."""
    profiles = (
        AnnotatorProfile.from_rates("a0", 0.8, 0.9),
        AnnotatorProfile.from_rates("a1", 0.7, 0.95),
        AnnotatorProfile.from_rates("a2", 0.6, 0.99),
    )
    structure = CorrelationStructure.independent(("a0", "a1", "a2"))
    return profiles, structure


def pattern(*codes):
    return AnnotationPattern([MISSING if c is None else int(c) for c in codes])
