"""Simulation and verification laboratory for a random Schrodinger operator.

The model: on a finite box in Z^d, a random potential beta with a
reciprocal-inverse-Gaussian-type law couples through nearest-neighbor
weights W; the operator of interest is 2*diag(beta) minus the weighted
adjacency, with simple or Dirichlet boundary corrections.  The package
provides exact and Gibbs samplers for the potential, spectral counting,
Green-function machinery, an effective-resistance identity, and audited
Monte-Carlo estimators for spectral statistics, all reproducible from a
single seed.
"""

from ._version import VERSION as __version__
from .critical import (
    CriticalReport,
    branching_factor,
    combined_critical_w,
    comparison_scan,
    critical_report,
    fractional_moment_critical_w,
    solve_critical_w,
    step_decay_integral,
)
from .field import (
    BetaField,
    PositivityLossError,
    QuadratureBudgetError,
    SamplerConfig,
    exact_field,
    gibbs_chain,
    laplace_exact,
    log_density,
    quadrature_oracle,
    sample_beta_batch,
    sample_field,
)
from .graphs import (
    Pinned,
    WeightedGraph,
    attach_delta,
    build_box,
    build_grid,
    dump_graph,
    load_graph,
    remove_vertex,
)
from .operators import (
    FactorizationError,
    OperatorMatrix,
    ResidualError,
    assemble,
    beta_from_u,
    count_eigenvalues_leq,
    count_eigenvalues_many,
    finite_volume_ids,
    green_column,
    green_matrix,
    operator_from_two_beta,
    path_sum_green,
    resolvent_identity_residual,
    schur_y_and_a,
    u_field,
)
from .resistance import (
    ConductanceNetwork,
    GreenSurrogate,
    IdentityMismatchError,
    IdentityReport,
    NetworkError,
    build_network,
    build_surrogate,
    effective_resistance,
    harmonic_residual,
    identity_check,
    nash_williams_bound,
    pinning_gamma_ks,
    subbox_indices,
    tilted_field,
)
from .rig import rig_cdf, rig_logpdf, rig_mode, rig_pdf, sample_rig
from .rng import chain_seed_key, philox_stream
from .stats import (
    DecayFit,
    EstimateWithCI,
    IdsCurve,
    MonteCarloConfig,
    bound_audit,
    decay_moment_fit,
    estimate_ids,
    fit_loglog_slope,
    gamma_marginal_test,
    laplace_audit,
    levy_concentration,
    localization_event_probabilities,
    martingale_check,
    monotonicity_check,
    wegner_audit,
    ward_moment_check,
)

__all__ = [
    "__version__",
    # graphs
    "WeightedGraph",
    "Pinned",
    "build_grid",
    "build_box",
    "attach_delta",
    "remove_vertex",
    "dump_graph",
    "load_graph",
    # rig
    "rig_logpdf",
    "rig_pdf",
    "rig_cdf",
    "rig_mode",
    "sample_rig",
    # rng
    "philox_stream",
    "chain_seed_key",
    # field
    "BetaField",
    "SamplerConfig",
    "PositivityLossError",
    "QuadratureBudgetError",
    "log_density",
    "laplace_exact",
    "sample_field",
    "gibbs_chain",
    "sample_beta_batch",
    "exact_field",
    "quadrature_oracle",
    # operators
    "OperatorMatrix",
    "FactorizationError",
    "ResidualError",
    "assemble",
    "operator_from_two_beta",
    "count_eigenvalues_leq",
    "count_eigenvalues_many",
    "finite_volume_ids",
    "green_column",
    "green_matrix",
    "u_field",
    "beta_from_u",
    "schur_y_and_a",
    "path_sum_green",
    "resolvent_identity_residual",
    # resistance
    "GreenSurrogate",
    "ConductanceNetwork",
    "IdentityReport",
    "NetworkError",
    "IdentityMismatchError",
    "subbox_indices",
    "build_surrogate",
    "tilted_field",
    "harmonic_residual",
    "build_network",
    "effective_resistance",
    "nash_williams_bound",
    "identity_check",
    "pinning_gamma_ks",
    # critical
    "CriticalReport",
    "step_decay_integral",
    "branching_factor",
    "solve_critical_w",
    "fractional_moment_critical_w",
    "combined_critical_w",
    "critical_report",
    "comparison_scan",
    # stats
    "EstimateWithCI",
    "IdsCurve",
    "DecayFit",
    "MonteCarloConfig",
    "estimate_ids",
    "fit_loglog_slope",
    "bound_audit",
    "wegner_audit",
    "decay_moment_fit",
    "localization_event_probabilities",
    "gamma_marginal_test",
    "laplace_audit",
    "ward_moment_check",
    "martingale_check",
    "monotonicity_check",
    "levy_concentration",
]
