"""Annotator calibration against gold-labeled validation data.

Estimates each annotator's confusion profile (sensitivity/specificity and
the probit thresholds they imply), the class-conditional latent
correlation structure of the panel via pairwise tetrachoric correlation,
and standard diagnostic metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from .annotations import EXPERT, MISSING, NEGATIVE, NON_EXPERT, POSITIVE, ValidationSet
from .errors import CalibrationError, DegenerateTableError, DomainError
from .numerics import CorrelationMatrix, _bvn_upper, nearest_correlation

RHO_LIMIT = 0.999  # tetrachoric estimates are clamped to +-RHO_LIMIT

__all__ = [
    "AnnotatorProfile",
    "CorrelationStructure",
    "DiagnosticReport",
    "build_correlation_structure",
    "diagnostic_metrics",
    "estimate_confusion",
    "fused_confusion",
    "tetrachoric",
]


@dataclass(frozen=True)
class AnnotatorProfile:
    """Calibrated error rates and the probit thresholds they induce.

    tau_pos is the latent cut point conditional on a true expert
    (positive rate = sensitivity), tau_neg conditional on a true
    non-expert (positive rate = 1 - specificity).
    """

    annotator_id: str
    sensitivity: float
    specificity: float
    tau_pos: float
    tau_neg: float

    @classmethod
    def from_rates(cls, annotator_id: str, sensitivity: float, specificity: float) -> "AnnotatorProfile":
        if not (0.0 < sensitivity < 1.0 and 0.0 < specificity < 1.0):
            raise DomainError("sensitivity and specificity must lie strictly in (0, 1)")
        return cls(
            annotator_id=str(annotator_id),
            sensitivity=float(sensitivity),
            specificity=float(specificity),
            tau_pos=float(ndtri(1.0 - sensitivity)),
            tau_neg=float(ndtri(specificity)),
        )

    def tau(self, label: int) -> float:
        return self.tau_pos if label == EXPERT else self.tau_neg


@dataclass(frozen=True)
class CorrelationStructure:
    """Class-conditional latent correlation matrices over the panel."""

    panel: tuple[str, ...]
    r_pos: CorrelationMatrix
    r_neg: CorrelationMatrix

    def __post_init__(self):
        panel = tuple(str(a) for a in self.panel)
        if len(panel) == 0 or len(set(panel)) != len(panel):
            raise DomainError("panel must be nonempty with unique annotator ids")
        if self.r_pos.dim != len(panel) or self.r_neg.dim != len(panel):
            raise DomainError("correlation matrices must match panel size")
        object.__setattr__(self, "panel", panel)

    @property
    def dim(self) -> int:
        return len(self.panel)

    def matrix(self, label: int) -> CorrelationMatrix:
        return self.r_pos if label == EXPERT else self.r_neg

    @classmethod
    def independent(cls, panel) -> "CorrelationStructure":
        panel = tuple(panel)
        eye = CorrelationMatrix.identity(len(panel))
        return cls(panel, eye, eye)


@dataclass(frozen=True)
class DiagnosticReport:
    """Sensitivity/specificity diagnostics with likelihood ratios."""

    sensitivity: float
    specificity: float
    accuracy: float
    lr_pos: float
    lr_neg: float

    @classmethod
    def from_rates(cls, sensitivity: float, specificity: float,
                   n_pos: int, n_neg: int) -> "DiagnosticReport":
        if n_pos < 1 or n_neg < 1:
            raise DomainError("class counts must be at least 1")
        accuracy = (sensitivity * n_pos + specificity * n_neg) / (n_pos + n_neg)
        fp_rate = 1.0 - specificity
        lr_pos = sensitivity / fp_rate if fp_rate > 0.0 else float("inf")
        lr_neg = (1.0 - sensitivity) / specificity if specificity > 0.0 else float("inf")
        return cls(float(sensitivity), float(specificity), float(accuracy),
                   float(lr_pos), float(lr_neg))


def _clamped_rate(hits: int, total: int) -> float:
    # half-count clamping keeps the derived probit thresholds finite
    floor = 0.5 / total
    return min(max(hits / total, floor), 1.0 - floor)


def estimate_confusion(validation: ValidationSet, annotator_id: str) -> AnnotatorProfile:
    """Confusion profile of one annotator over its non-missing annotations.

    Rates are clamped to [0.5/n, 1 - 0.5/n] per gold class so they never
    reach 0 or 1 exactly.
    """
    try:
        column = validation.panel.index(annotator_id)
    except ValueError:
        raise CalibrationError(f"annotator {annotator_id!r} is not in the validation panel") from None
    labels = validation.annotations[:, column]
    observed = labels != MISSING
    pos_mask = observed & (validation.gold == EXPERT)
    neg_mask = observed & (validation.gold == NON_EXPERT)
    n_pos = int(np.count_nonzero(pos_mask))
    n_neg = int(np.count_nonzero(neg_mask))
    if n_pos == 0 or n_neg == 0:
        missing_class = "expert" if n_pos == 0 else "non-expert"
        raise CalibrationError(
            f"annotator {annotator_id!r} has no non-missing annotations in the {missing_class} class"
        )
    tp = int(np.count_nonzero(labels[pos_mask] == POSITIVE))
    tn = int(np.count_nonzero(labels[neg_mask] == NEGATIVE))
    return AnnotatorProfile.from_rates(
        annotator_id, _clamped_rate(tp, n_pos), _clamped_rate(tn, n_neg)
    )


def diagnostic_metrics(profile: AnnotatorProfile, n_pos: int, n_neg: int) -> DiagnosticReport:
    """Prevalence-weighted accuracy and likelihood ratios for a profile."""
    return DiagnosticReport.from_rates(profile.sensitivity, profile.specificity, n_pos, n_neg)


def tetrachoric(table) -> float:
    """Latent correlation of two binary annotators from their 2x2 table.

    ``table[0][0]`` counts both-positive, rows index the first annotator
    (positive, negative), columns the second.  Zero cells receive a +0.5
    continuity correction.  The returned rho solves the bivariate-normal
    quadrant equation to |f(rho)| <= 1e-8 and is clamped to +-0.999.
    """
    t = np.array(table, dtype=float)
    if t.shape != (2, 2):
        raise DomainError("table must be 2x2")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise DomainError("table counts must be finite and nonnegative")
    if t.sum() == 0:
        raise DegenerateTableError("table has no observations")
    t = np.where(t == 0, 0.5, t)
    if np.any(t.sum(axis=0) <= 0) or np.any(t.sum(axis=1) <= 0):
        raise DegenerateTableError("a table margin is empty even after continuity correction")

    n = t.sum()
    p_first = (t[0, 0] + t[0, 1]) / n
    p_second = (t[0, 0] + t[1, 0]) / n
    p_both = t[0, 0] / n
    h = float(ndtri(1.0 - p_first))
    k = float(ndtri(1.0 - p_second))

    def gap(rho: float) -> float:
        return _bvn_upper(h, k, rho) - p_both

    # gap is increasing in rho; clamp when the root lies outside the range
    if gap(RHO_LIMIT) < 0.0:
        return RHO_LIMIT
    if gap(-RHO_LIMIT) > 0.0:
        return -RHO_LIMIT
    rho = brentq(gap, -RHO_LIMIT, RHO_LIMIT, xtol=1e-12, rtol=8.9e-16)
    if abs(gap(rho)) > 1e-8:
        raise CalibrationError("tetrachoric root finding did not converge")
    return float(rho)


def _pairwise_matrix(annotations: np.ndarray, pair_context: list[str]) -> np.ndarray:
    """Pairwise tetrachoric matrix over non-missing overlaps."""
    k = annotations.shape[1]
    matrix = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            both = (annotations[:, i] != MISSING) & (annotations[:, j] != MISSING)
            a = annotations[both, i] == POSITIVE
            b = annotations[both, j] == POSITIVE
            table = [
                [int(np.count_nonzero(a & b)), int(np.count_nonzero(a & ~b))],
                [int(np.count_nonzero(~a & b)), int(np.count_nonzero(~a & ~b))],
            ]
            try:
                rho = tetrachoric(table)
            except DegenerateTableError as exc:
                raise DegenerateTableError(
                    f"annotator pair ({pair_context[i]!r}, {pair_context[j]!r}): {exc}"
                ) from exc
            matrix[i, j] = matrix[j, i] = rho
    return matrix


def build_correlation_structure(validation: ValidationSet, panel,
                                min_class_count: int = 30) -> CorrelationStructure:
    """Class-conditional correlation structure of the panel.

    A gold class with fewer than ``min_class_count`` records falls back to
    the pooled (all-records) matrix.  Both matrices are repaired to PSD.
    """
    panel = tuple(str(a) for a in panel)
    missing = [a for a in panel if a not in validation.panel]
    if missing:
        raise CalibrationError(f"annotators {missing} are not in the validation panel")
    columns = [validation.panel.index(a) for a in panel]
    ann = validation.annotations[:, columns]
    context = list(panel)

    pooled: np.ndarray | None = None

    def class_matrix(label: int) -> np.ndarray:
        nonlocal pooled
        mask = validation.gold == label
        if int(np.count_nonzero(mask)) >= min_class_count:
            return _pairwise_matrix(ann[mask], context)
        if pooled is None:
            pooled = _pairwise_matrix(ann, context)
        return pooled

    r_pos = nearest_correlation(class_matrix(EXPERT))
    r_neg = nearest_correlation(class_matrix(NON_EXPERT))
    return CorrelationStructure(panel, r_pos, r_neg)


def fused_confusion(validation: ValidationSet, posteriors, cut: float = 0.5) -> DiagnosticReport:
    """Diagnostics of the fused estimator: posteriors thresholded at ``cut``
    and scored against the gold labels."""
    if not (0.0 < cut < 1.0):
        raise DomainError("cut must lie strictly in (0, 1)")
    p = np.asarray(posteriors, dtype=float)
    if p.shape != (validation.n_records,):
        raise DomainError(
            f"posteriors length {p.shape} does not match {validation.n_records} validation records"
        )
    predicted = p >= cut
    gold_pos = validation.gold == EXPERT
    n_pos = int(np.count_nonzero(gold_pos))
    n_neg = validation.n_records - n_pos
    sensitivity = int(np.count_nonzero(predicted & gold_pos)) / n_pos
    specificity = int(np.count_nonzero(~predicted & ~gold_pos)) / n_neg
    return DiagnosticReport.from_rates(sensitivity, specificity, n_pos, n_neg)
