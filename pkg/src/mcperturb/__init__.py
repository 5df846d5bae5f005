"""Perturbation analysis of Markov chains.

Stationary distributions, deviation matrices, taboo kernels, four families of
perturbation bounds with relative-error diagnostics, stability-domain
certificates, and a small set of example models including a breakdown queue.
"""

from .core import (
    DegeneratePerturbation,
    DeviationUnavailable,
    InvalidInput,
    InvalidTabooSpec,
    McError,
    NoCertificate,
    NoFeasibleAlpha,
    Norm,
    NotUnichain,
    NoUniformColumn,
    OutOfDomain,
    ProbabilityMeasure,
    StochasticMatrix,
    TabooNotProper,
    function_norm,
    measure_norm,
    operator_norm,
    optimize_alpha,
    point_mass,
    reward_gap_bound,
)
from .stationary import (
    ErgodicDecomposition,
    TabooSpec,
    UnichainReport,
    auto_taboo,
    deviation_via_taboo,
    ergodic_decomposition,
    recurrence_certificate,
    remove_column,
    stationary_distribution,
    stationary_norm_bound,
    taboo_kernel,
    validate_unichain,
)
from .bounds import (
    BoundReport,
    CBound,
    ConditionReport,
    PerturbationPair,
    ScaledPerturbation,
    bias_term_estimate,
    cnb_bound,
    cnb_update,
    direct_bound,
    kappa3,
    kappa6,
    neumann_condition,
    relative_errors,
    seb,
    seb_polynomial,
    seb_polynomial_eval,
    series_expansion,
    ssb,
    ssb_theta_domain,
    stability_domain,
)
from .models import (
    AtomMixture,
    Exponential,
    QueueSpec,
    QueueSsbCoefficients,
    RingParams,
    StarForms,
    StarParams,
    TwoStateBounds,
    TwoStateForms,
    TwoStateParams,
    mg1_breakdown_kernel,
    mg1_feasible_alpha_ceiling,
    mg1_ssb_bound,
    mg1_ssb_coefficients,
    mg1_ssb_theta_domain,
    mg1_stability_lower_bound,
    mg1_stability_ratio,
    random_chain,
    ring_deviation,
    ring_kappa3,
    ring_kernel,
    star_closed_forms,
    star_kernel,
    two_state_bounds,
    two_state_closed_forms,
    two_state_kernel,
)

__version__ = "0.1.0"
