"""Correlated-probit fusion of noisy binary annotators.

Calibrates a panel of imperfect annotators on gold-labeled data, fuses
their labels into per-record posteriors via multivariate-normal orthant
likelihoods, synthesizes employee-level annotations from aggregate counts
with a Gaussian copula, and bootstraps company-level headcount estimates
with 10/50/90 percentile intervals.
"""

from .annotations import (
    EXPERT,
    MISSING,
    NEGATIVE,
    NON_EXPERT,
    POSITIVE,
    AnnotationPattern,
    ValidationSet,
)
from .bootstrap import (
    BootstrapConfig,
    CompanyPatterns,
    EstimateSummary,
    PriorSpec,
    aggregate_portfolio,
    classify,
    default_priors,
    estimate_companies,
    run_company_estimate,
    select_prior,
    size_band_for,
)
from .calibration import (
    AnnotatorProfile,
    CorrelationStructure,
    DiagnosticReport,
    build_correlation_structure,
    diagnostic_metrics,
    estimate_confusion,
    fused_confusion,
    tetrachoric,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateTableError,
    DomainError,
    FactorizationError,
    ParseError,
    ProbitFuseError,
)
from .inference import (
    PatternLikelihoodCache,
    company_posteriors,
    pattern_likelihood,
    posterior_prob,
    realize_headcount,
)
from .numerics import (
    ABOVE,
    BELOW,
    CorrelationMatrix,
    OrthantSpec,
    bvn_cdf,
    cholesky_lower,
    mvn_orthant_prob,
    nearest_correlation,
    std_normal_cdf,
    std_normal_quantile,
)
from .simulate import (
    SimulationScenario,
    generate_population,
    load_scenario,
    scoreboard,
)
from .synthetic import (
    AggregateCounts,
    SyntheticConfig,
    adjust_headcount_draws,
    copula_generate,
)

__version__ = "0.1.0"
