"""File ingestion and report emission.

All tabular files are comma-separated text with a fixed header; numeric
output uses plain decimals and counts are integers, so identical inputs
and seeds produce byte-identical reports.  Priors come from a JSON
config.  Parse errors always carry the offending 1-based line number.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

from .annotations import MISSING, NEGATIVE, POSITIVE, AnnotationPattern, ValidationSet
from .bootstrap import EstimateSummary, PriorSpec, aggregate_portfolio, default_priors
from .errors import ConfigError, DomainError, ParseError
from .synthetic import AggregateCounts

__all__ = [
    "IngestionRules",
    "LoadedCompanies",
    "load_aggregates",
    "load_company_annotations",
    "load_priors",
    "load_validation",
    "read_report",
    "write_report",
    "write_validation",
]

REPORT_COLUMNS = [
    "company_id", "n_employees", "mean", "q10", "q50", "q90",
    "ml_pct_q50", "category", "method", "marker",
]

_CELL_CODES = {"1": POSITIVE, "0": NEGATIVE, "": MISSING}


@dataclass(frozen=True)
class IngestionRules:
    """Row-count sanity rules for employee-level company files.

    Companies whose row count disagrees with the reported headcount by
    more than ``headcount_ratio_limit`` (either direction) have the
    columns named in ``llm_annotators`` blanked; keyword columns are kept.
    """

    headcount_ratio_limit: float = 3.0
    clamp_prevalence: bool = True
    llm_annotators: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.headcount_ratio_limit > 1.0):
            raise DomainError("headcount_ratio_limit must exceed 1")
        object.__setattr__(self, "llm_annotators", tuple(self.llm_annotators))


@dataclass(frozen=True)
class LoadedCompanies:
    """Employee patterns per company plus the ids flagged by the ratio rule."""

    patterns_by_company: dict[str, list[AnnotationPattern]]
    flagged: frozenset[str]


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            rows = [(lineno, row) for lineno, row in enumerate(reader, start=1)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    rows = [(lineno, row) for lineno, row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ParseError(f"{path} is empty")
    header_line, header = rows[0]
    return [cell.strip() for cell in header], rows[1:]


def _cell_code(cell: str, lineno: int):
    try:
        return _CELL_CODES[cell.strip()]
    except KeyError:
        raise ParseError(f"annotation cell must be 1, 0 or empty, got {cell!r}", lineno) from None


def load_validation(path) -> ValidationSet:
    """Parse a validation CSV: record_id, gold, then one column per annotator."""
    header, rows = _read_rows(path)
    if len(header) < 3 or header[0] != "record_id" or header[1] != "gold":
        raise ParseError(
            "validation header must start with record_id,gold and declare at least one annotator",
            1,
        )
    panel = tuple(header[2:])
    if len(set(panel)) != len(panel):
        raise ParseError("duplicate annotator column in header", 1)

    ids: list[str] = []
    seen: set[str] = set()
    gold: list[int] = []
    annotations: list[list[int]] = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", lineno)
        record_id = row[0].strip()
        if not record_id:
            raise ParseError("empty record_id", lineno)
        if record_id in seen:
            raise ParseError(f"duplicate record_id {record_id!r}", lineno)
        seen.add(record_id)
        gold_cell = row[1].strip()
        if gold_cell not in ("0", "1"):
            raise ParseError(f"gold label must be 1 or 0, got {gold_cell!r}", lineno)
        ids.append(record_id)
        gold.append(int(gold_cell))
        annotations.append([_cell_code(cell, lineno) for cell in row[2:]])
    try:
        return ValidationSet(tuple(ids), gold, panel, annotations)
    except DomainError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_company_annotations(path, rules: IngestionRules, reported_headcounts: dict,
                             panel) -> LoadedCompanies:
    """Parse an employee-level company CSV against the calibration panel.

    Columns must be a subset of ``panel``; absent annotators come back
    missing.  Companies failing the headcount ratio rule lose their LLM
    columns and are flagged for the synthetic-comparison report.
    """
    panel = tuple(panel)
    header, rows = _read_rows(path)
    if len(header) < 3 or header[0] != "company_id" or header[1] != "employee_id":
        raise ParseError(
            "company header must start with company_id,employee_id and declare annotators", 1
        )
    columns = header[2:]
    unknown = [c for c in columns if c not in panel]
    if unknown:
        raise ParseError(f"annotator columns {unknown} are not in the panel {list(panel)}", 1)
    column_slot = {name: panel.index(name) for name in columns}

    per_company: dict[str, list[list[int]]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", lineno)
        company_id = row[0].strip()
        employee_id = row[1].strip()
        if not company_id or not employee_id:
            raise ParseError("company_id and employee_id must be nonempty", lineno)
        key = (company_id, employee_id)
        if key in seen:
            raise ParseError(f"duplicate (company_id, employee_id) {key}", lineno)
        seen.add(key)
        values = [MISSING] * len(panel)
        for name, cell in zip(columns, row[2:]):
            values[column_slot[name]] = _cell_code(cell, lineno)
        per_company.setdefault(company_id, []).append(values)

    llm_slots = [panel.index(a) for a in rules.llm_annotators if a in panel]
    flagged: set[str] = set()
    result: dict[str, list[AnnotationPattern]] = {}
    for company_id, value_rows in per_company.items():
        reported = reported_headcounts.get(company_id)
        if reported is None:
            warnings.warn(
                f"company {company_id!r}: no reported headcount; ratio rule not applied",
                stacklevel=2,
            )
        else:
            n_rows = len(value_rows)
            ratio = max(reported / n_rows, n_rows / reported)
            if ratio > rules.headcount_ratio_limit:
                flagged.add(company_id)
                for values in value_rows:
                    for slot in llm_slots:
                        values[slot] = MISSING
        result[company_id] = [AnnotationPattern(values) for values in value_rows]
    return LoadedCompanies(result, frozenset(flagged))


def write_validation(validation: ValidationSet, path) -> None:
    """Serialize a validation set back to its CSV form."""
    code_cell = {POSITIVE: "1", NEGATIVE: "0", MISSING: ""}
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["record_id", "gold", *validation.panel])
        for i, record_id in enumerate(validation.record_ids):
            cells = [code_cell[int(v)] for v in validation.annotations[i]]
            writer.writerow([record_id, str(int(validation.gold[i])), *cells])


def load_aggregates(path) -> dict[str, AggregateCounts]:
    """Parse aggregate keyword counts: company_id, total_headcount, then one
    column per keyword filter; an empty cell means the filter is unavailable."""
    header, rows = _read_rows(path)
    if len(header) < 3 or header[0] != "company_id" or header[1] != "total_headcount":
        raise ParseError(
            "aggregates header must start with company_id,total_headcount and declare filters", 1
        )
    filters = header[2:]
    if len(set(filters)) != len(filters):
        raise ParseError("duplicate filter column in header", 1)
    out: dict[str, AggregateCounts] = {}
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", lineno)
        company_id = row[0].strip()
        if not company_id:
            raise ParseError("empty company_id", lineno)
        if company_id in out:
            raise ParseError(f"duplicate company_id {company_id!r}", lineno)
        try:
            total = int(row[1])
        except ValueError:
            raise ParseError(f"total_headcount must be an integer, got {row[1]!r}", lineno) from None
        counts = {}
        for name, cell in zip(filters, row[2:]):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                counts[name] = int(cell)
            except ValueError:
                raise ParseError(f"filter count must be an integer, got {cell!r}", lineno) from None
        try:
            out[company_id] = AggregateCounts(company_id, total, counts)
        except DomainError as exc:
            raise ParseError(str(exc), lineno) from exc
    return out


def load_priors(path) -> list[PriorSpec]:
    """Priors from a JSON config; a missing file yields the defaults."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        return default_priors()
    except OSError as exc:
        raise ConfigError(f"cannot read priors file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"priors file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ConfigError("priors file must contain a JSON list of prior entries")
    known = {"org_type", "size_band", "alpha", "beta"}
    priors = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"priors entry {i} must be an object")
        extra = sorted(set(entry) - known)
        if extra:
            warnings.warn(f"priors entry {i}: ignoring unknown keys {extra}", stacklevel=2)
        missing = sorted(known - set(entry))
        if missing:
            raise ConfigError(f"priors entry {i} is missing keys {missing}")
        priors.append(PriorSpec(
            org_type=str(entry["org_type"]),
            size_band=str(entry["size_band"]),
            alpha=float(entry["alpha"]),
            beta=float(entry["beta"]),
        ))
    if not priors:
        raise ConfigError("priors file declares no entries")
    return priors


def _format_mean(value: float) -> str:
    return f"{value:.6f}"


def _format_pct(q50: int, n_employees: int) -> str:
    pct = 100.0 * q50 / n_employees if n_employees > 0 else 0.0
    return f"{pct:.4f}"


def _summary_row(summary: EstimateSummary) -> list[str]:
    return [
        summary.company_id,
        str(summary.n_employees),
        _format_mean(summary.mean),
        str(summary.q10),
        str(summary.q50),
        str(summary.q90),
        _format_pct(summary.q50, summary.n_employees),
        summary.category,
        summary.method,
        "*" if summary.method == "synthetic" else "",
    ]


def write_report(estimates, path, draw_matrix=None) -> None:
    """Write the company report plus a final AGGREGATE row.

    The aggregate row is computed from the per-company draw matrix
    (iterations x companies); it is required whenever ``estimates`` is
    nonempty because portfolio quantiles cannot be derived from the
    per-company summaries alone.
    """
    estimates = list(estimates)
    if estimates:
        if draw_matrix is None:
            raise DomainError("draw_matrix is required to build the AGGREGATE row")
        methods = {e.method for e in estimates}
        method = methods.pop() if len(methods) == 1 else "mixed"
        aggregate = aggregate_portfolio(
            draw_matrix,
            n_employees=sum(e.n_employees for e in estimates),
            method=method,
        )
    else:
        aggregate = None

    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for summary in estimates:
                writer.writerow(_summary_row(summary))
            if aggregate is not None:
                writer.writerow(_summary_row(aggregate))
            else:
                writer.writerow(["AGGREGATE", "0", _format_mean(0.0), "0", "0", "0",
                                 _format_pct(0, 0), "NotDetected", "real", ""])
    except OSError as exc:
        raise ParseError(f"cannot write report to {path}: {exc}") from exc


def read_report(path) -> list[EstimateSummary]:
    """Re-parse a written report (AGGREGATE row included, in file order)."""
    header, rows = _read_rows(path)
    if header != REPORT_COLUMNS:
        raise ParseError(f"unexpected report header {header}", 1)
    out = []
    for lineno, row in rows:
        if len(row) != len(REPORT_COLUMNS):
            raise ParseError(f"expected {len(REPORT_COLUMNS)} cells, got {len(row)}", lineno)
        try:
            out.append(EstimateSummary(
                company_id=row[0],
                n_employees=int(row[1]),
                mean=float(row[2]),
                q10=int(row[3]),
                q50=int(row[4]),
                q90=int(row[5]),
                category=row[7],
                method=row[8],
            ))
        except (ValueError, DomainError) as exc:
            raise ParseError(f"invalid report row: {exc}", lineno) from exc
    return out
