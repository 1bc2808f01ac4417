"""Command-line surface: calibrate, estimate, simulate, and report.

Every subcommand is deterministic given its flags and seed.  The seed
comes from --seed, falling back to the PROBITFUSE_SEED environment
variable and then to 0.  Warnings go to stderr and never change the exit
status; errors print a message and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import io as pfio
from .bootstrap import (
    BootstrapConfig,
    CompanyPatterns,
    default_priors,
    estimate_companies,
    select_prior,
    size_band_for,
)
from .calibration import (
    build_correlation_structure,
    diagnostic_metrics,
    estimate_confusion,
    fused_confusion,
)
from .errors import ProbitFuseError
from .inference import PatternLikelihoodCache
from .simulate import generate_population, load_scenario, scoreboard
from .streams import stream_seed
from .synthetic import SyntheticConfig

DEFAULT_SEED_ENV = "PROBITFUSE_SEED"


@dataclass
class RunConfig:
    """Resolved run parameters shared by the subcommands."""

    seed: int = 0
    iterations: int = 1000
    accuracy: float = 1e-3
    adjustment: float = 0.5
    priors_path: str | None = None
    output_path: str = "report.csv"
    default_org_type: str | None = None
    default_size_band: str | None = None
    org_type_overrides: dict[str, str] = field(default_factory=dict)
    size_band_overrides: dict[str, str] = field(default_factory=dict)


def _env_seed() -> int:
    raw = os.environ.get(DEFAULT_SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ProbitFuseError(f"{DEFAULT_SEED_ENV} must be an integer, got {raw!r}") from None


def _parse_overrides(pairs, flag: str) -> tuple[str | None, dict[str, str]]:
    """KEY=VALUE entries become per-company overrides; a bare VALUE applies
    to every company."""
    default = None
    per_company: dict[str, str] = {}
    for pair in pairs or []:
        if "=" in pair:
            key, value = pair.split("=", 1)
            per_company[key.strip()] = value.strip()
        else:
            if default is not None:
                raise ProbitFuseError(f"{flag}: only one bare default value is allowed")
            default = pair.strip()
    return default, per_company


def _float_json(value: float) -> float:
    return float(value)


def cmd_calibrate(validation_path: str, output_path: str, config: RunConfig) -> int:
    """Calibrate on a validation file and write a JSON calibration report."""
    validation = pfio.load_validation(validation_path)
    profiles = [estimate_confusion(validation, a) for a in validation.panel]
    structure = build_correlation_structure(validation, validation.panel)
    prevalence = validation.n_expert / validation.n_records
    cache = PatternLikelihoodCache(
        profiles, structure, stream_seed(config.seed, "calibrate"), config.accuracy
    )
    posteriors = np.array([
        cache.posterior(validation.pattern(i), prevalence)
        for i in range(validation.n_records)
    ])
    fused = fused_confusion(validation, posteriors, 0.5)

    report = {
        "panel": list(validation.panel),
        "n_records": validation.n_records,
        "n_expert": validation.n_expert,
        "n_non_expert": validation.n_non_expert,
        "profiles": [
            {
                "annotator_id": p.annotator_id,
                "sensitivity": _float_json(p.sensitivity),
                "specificity": _float_json(p.specificity),
                "tau_pos": _float_json(p.tau_pos),
                "tau_neg": _float_json(p.tau_neg),
                "accuracy": _float_json(
                    diagnostic_metrics(p, validation.n_expert, validation.n_non_expert).accuracy
                ),
            }
            for p in profiles
        ],
        "correlation_pos": structure.r_pos.entries.tolist(),
        "correlation_neg": structure.r_neg.entries.tolist(),
        "fused": {
            "cut": 0.5,
            "sensitivity": _float_json(fused.sensitivity),
            "specificity": _float_json(fused.specificity),
            "accuracy": _float_json(fused.accuracy),
            "lr_pos": _float_json(fused.lr_pos),
            "lr_neg": _float_json(fused.lr_neg),
        },
    }
    with open(output_path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2)
        handle.write("\n")
    return 0


def _load_priors(config: RunConfig):
    if config.priors_path is not None:
        return pfio.load_priors(config.priors_path)
    return default_priors()


def _resolve_prior(priors, company_id: str, headcount: int | None, config: RunConfig):
    org = config.org_type_overrides.get(
        company_id, config.default_org_type or "consulting_or_ml")
    band = config.size_band_overrides.get(
        company_id, config.default_size_band or size_band_for(headcount))
    return select_prior(priors, org, band)


def cmd_estimate(validation_path: str, companies_path: str | None,
                 aggregates_path: str | None, config: RunConfig) -> int:
    """Estimate all companies and write the combined report."""
    if companies_path is None and aggregates_path is None:
        raise ProbitFuseError("at least one of --companies/--aggregates is required")
    validation = pfio.load_validation(validation_path)
    priors = _load_priors(config)

    aggregates = pfio.load_aggregates(aggregates_path) if aggregates_path else {}
    reported = {cid: agg.total_headcount for cid, agg in aggregates.items()}

    companies: list = []
    headcounts: dict[str, int | None] = {}
    if companies_path:
        filters = set()
        for agg in aggregates.values():
            filters.update(agg.filter_counts)
        llm_annotators = tuple(a for a in validation.panel if a not in filters) if filters else ()
        rules = pfio.IngestionRules(llm_annotators=llm_annotators)
        loaded = pfio.load_company_annotations(companies_path, rules, reported, validation.panel)
        for company_id in sorted(loaded.patterns_by_company):
            patterns = loaded.patterns_by_company[company_id]
            companies.append(CompanyPatterns(company_id, tuple(patterns)))
            headcounts[company_id] = reported.get(company_id, len(patterns))
        for company_id in sorted(loaded.flagged):
            warnings.warn(
                f"company {company_id!r} failed the headcount ratio check; "
                "LLM columns dropped and flagged for synthetic comparison"
            )

    real_ids = {c.company_id for c in companies}
    for company_id in sorted(aggregates):
        if company_id in real_ids:
            warnings.warn(
                f"company {company_id!r} appears in both inputs; using real employee data"
            )
            continue
        companies.append(aggregates[company_id])
        headcounts[company_id] = aggregates[company_id].total_headcount

    company_priors = [
        _resolve_prior(priors, c.company_id, headcounts[c.company_id], config)
        for c in companies
    ]

    bootstrap_config = BootstrapConfig(
        iterations=config.iterations, seed=config.seed, accuracy=config.accuracy
    )
    summaries, draws = estimate_companies(
        companies, validation, company_priors, bootstrap_config,
        SyntheticConfig(adjustment=config.adjustment),
    )
    pfio.write_report(summaries, config.output_path, draws)
    return 0


def cmd_simulate(scenario_path: str, config: RunConfig) -> int:
    """Generate a known-truth population, estimate it, write the scoreboard."""
    scenario = load_scenario(scenario_path, fallback_seed=config.seed)
    population = generate_population(scenario)
    priors = _load_priors(config)

    companies = [CompanyPatterns(c.company_id, c.patterns) for c in population.companies]
    company_priors = [
        _resolve_prior(priors, c.company_id, c.n_employees, config)
        for c in population.companies
    ]
    bootstrap_config = BootstrapConfig(
        iterations=config.iterations, seed=config.seed, accuracy=config.accuracy
    )
    summaries, _ = estimate_companies(
        companies, population.validation, company_priors, bootstrap_config
    )
    board = scoreboard(scenario, summaries, accuracy=config.accuracy)

    payload = {
        "coverage": _float_json(board.coverage),
        "q50_median_abs_error": _float_json(board.q50_median_abs_error),
        "fused_accuracy": _float_json(board.fused_accuracy),
        "best_individual_accuracy": _float_json(board.best_individual_accuracy),
        "fused_beats_all_individual": board.fused_beats_all_individual,
        "individual_accuracies": {
            k: _float_json(v) for k, v in sorted(board.individual_accuracies.items())
        },
        "per_company": [
            {**row, "covered": bool(row["covered"])} for row in board.rows
        ],
    }
    with open(config.output_path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
    return 0


def cmd_report(report_path: str) -> int:
    """Re-parse a written report and print a category tally."""
    summaries = pfio.read_report(report_path)
    tally: dict[str, int] = {}
    for summary in summaries:
        if summary.company_id == "AGGREGATE":
            continue
        tally[summary.category] = tally.get(summary.category, 0) + 1
    print(f"{'company_id':<24} {'n':>8} {'q50':>8} {'q10':>8} {'q90':>8}  category")
    for summary in summaries:
        print(f"{summary.company_id:<24} {summary.n_employees:>8} {summary.q50:>8} "
              f"{summary.q10:>8} {summary.q90:>8}  {summary.category}")
    for category in ("Probable", "Possible", "NonZero", "NotDetected"):
        if category in tally:
            print(f"{category}: {tally[category]}")
    return 0


def _add_common(parser: argparse.ArgumentParser, default_out: str):
    parser.add_argument("--seed", type=int, default=None,
                        help=f"base seed (default: ${DEFAULT_SEED_ENV} or 0)")
    parser.add_argument("--iterations", type=int, default=1000)
    parser.add_argument("--accuracy", type=float, default=1e-3,
                        help="orthant integrator absolute error target")
    parser.add_argument("--priors", default=None, help="priors JSON file")
    parser.add_argument("--out", default=default_out, help="output path")
    parser.add_argument("--org-type", action="append", default=None, metavar="[COMPANY=]TYPE",
                        help="org type override, repeatable")
    parser.add_argument("--size-band", action="append", default=None, metavar="[COMPANY=]BAND",
                        help="size band override, repeatable")
    parser.add_argument("--adjustment", type=float, default=0.5,
                        help="synthetic-path adjustment factor")


def _config_from_args(args) -> RunConfig:
    seed = args.seed if args.seed is not None else _env_seed()
    org_default, org_overrides = _parse_overrides(args.org_type, "--org-type")
    band_default, band_overrides = _parse_overrides(args.size_band, "--size-band")
    return RunConfig(
        seed=seed,
        iterations=args.iterations,
        accuracy=args.accuracy,
        adjustment=args.adjustment,
        priors_path=args.priors,
        output_path=args.out,
        default_org_type=org_default,
        default_size_band=band_default,
        org_type_overrides=org_overrides,
        size_band_overrides=band_overrides,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probitfuse",
        description="Correlated-probit fusion of noisy binary annotators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cal = sub.add_parser("calibrate", help="estimate annotator profiles and correlations")
    p_cal.add_argument("validation", help="validation CSV")
    _add_common(p_cal, "calibration.json")

    p_est = sub.add_parser("estimate", help="bootstrap company headcount estimates")
    p_est.add_argument("--validation", required=True, help="validation CSV")
    p_est.add_argument("--companies", default=None, help="employee-level company CSV")
    p_est.add_argument("--aggregates", default=None, help="aggregate keyword-count CSV")
    _add_common(p_est, "report.csv")

    p_sim = sub.add_parser("simulate", help="run a known-truth simulation scoreboard")
    p_sim.add_argument("scenario", help="scenario JSON")
    _add_common(p_sim, "scoreboard.json")

    p_rep = sub.add_parser("report", help="inspect a written report file")
    p_rep.add_argument("report", help="report CSV produced by estimate")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            if args.command == "calibrate":
                config = _config_from_args(args)
                return cmd_calibrate(args.validation, config.output_path, config)
            if args.command == "estimate":
                config = _config_from_args(args)
                return cmd_estimate(args.validation, args.companies, args.aggregates, config)
            if args.command == "simulate":
                config = _config_from_args(args)
                return cmd_simulate(args.scenario, config)
            if args.command == "report":
                return cmd_report(args.report)
            parser.error(f"unknown command {args.command!r}")
    except ProbitFuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
