"""Change-point estimation in a Gaussian sequence: MLE vs generalized Bayes.

Estimators for a single change in mean, Monte Carlo of the limiting
likelihood-ratio process, closed-form asymptotic risks, and a replication
harness for finite-sample risk ratios.
"""

from .asymptotic_risk import AsymptoticInputs, RiskExpansion, kappa0, risk_expansion, zeta3
from .core import (
    FUNCTIONALS,
    THETA_TAU,
    Functional,
    ModelParams,
    RngStream,
    SequenceSample,
    gaussian_draws,
    get_functional,
)
from .limiting_process import (
    BrownianPath,
    GridSpec,
    LimitDrawResult,
    LimitGaussPart,
    draw_limit_estimates,
    draw_limit_gauss_part,
    estimate_limit_constants,
    sample_brownian_path,
)
from .mc_harness import RiskCell, RiskTable, StudyConfig, run_cell, run_study
from .sequence_model import (
    CumulativeStats,
    EstimateSet,
    PosteriorSummary,
    bayes_estimates,
    bayes_posterior,
    cumulative_stats,
    estimate,
    generate_sequence,
    log_likelihood,
    mle_estimates,
    mle_tau,
)

__version__ = "0.1.0"
