"""EM convergence-rate estimation for three latent-variable models.

The package implements the EM iteration for a symmetric two-component
Gaussian mixture, mixed linear regression, and regression with missing
covariates, together with data-driven estimates of the per-dataset
contraction rate and population-level bounds to compare them against.
"""

__version__ = "0.1.0"

from .em import EMTrajectory, RateEstimate, StoppedReason, estimate_rate, run_em
from .errors import (
    ConfigError,
    EmratesError,
    OutOfRegime,
    SingularSystem,
    TooFewPoints,
    ValidationError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    FixedOffset,
    RandomInBall,
    RunRecord,
    run_consistency_study,
    run_rate_fluctuation_study,
    run_rate_stabilization_study,
)
from .models import (
    Dataset,
    ModelKind,
    ModelSpec,
    PerSampleQuantities,
    Sample,
    log_likelihood,
    m_step,
    per_sample_quantities,
    q_gradient,
    q_mean,
    q_value,
    sample_dataset,
)
from .oracle import (
    BoundConstants,
    ContractionParams,
    EpsilonBounds,
    Provenance,
    SampleSizeReport,
    check_sample_size_conditions,
    closed_form_bounds,
    epsilon_bounds,
    mc_population_grv_bound,
    rmc_population_moments,
)
from .rates import (
    BallSpec,
    ContractionAuditReport,
    EmpiricalRates,
    SearchBudget,
    compute_empirical_rates,
    compute_k_bar_n,
    empirical_crv,
    empirical_grv,
    empirical_sev,
    estimate_gamma_bar_n,
    estimate_v_bar_n,
    verify_contraction_inequality,
)

__all__ = [
    "__version__",
    "BallSpec",
    "BoundConstants",
    "ConfigError",
    "ContractionAuditReport",
    "ContractionParams",
    "Dataset",
    "EMTrajectory",
    "EmpiricalRates",
    "EmratesError",
    "EpsilonBounds",
    "ExperimentConfig",
    "ExperimentResult",
    "FixedOffset",
    "ModelKind",
    "ModelSpec",
    "OutOfRegime",
    "PerSampleQuantities",
    "Provenance",
    "RandomInBall",
    "RateEstimate",
    "RunRecord",
    "Sample",
    "SampleSizeReport",
    "SearchBudget",
    "SingularSystem",
    "StoppedReason",
    "TooFewPoints",
    "ValidationError",
    "check_sample_size_conditions",
    "closed_form_bounds",
    "compute_empirical_rates",
    "compute_k_bar_n",
    "empirical_crv",
    "empirical_grv",
    "empirical_sev",
    "epsilon_bounds",
    "estimate_gamma_bar_n",
    "estimate_rate",
    "estimate_v_bar_n",
    "log_likelihood",
    "m_step",
    "mc_population_grv_bound",
    "per_sample_quantities",
    "q_gradient",
    "q_mean",
    "q_value",
    "rmc_population_moments",
    "run_consistency_study",
    "run_em",
    "run_rate_fluctuation_study",
    "run_rate_stabilization_study",
    "sample_dataset",
    "verify_contraction_inequality",
]
