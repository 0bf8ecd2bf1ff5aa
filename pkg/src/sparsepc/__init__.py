"""Sparse Wiener-Hermite polynomial chaos for lognormal diffusion on the torus."""

from __future__ import annotations

from .errors import (
    CoefficientDegeneracyError,
    ConfigError,
    DivergenceError,
    DomainError,
    NonConvergenceError,
    ResolutionError,
    ResourceError,
    SparsePCError,
)
from .hermite import GaussHermiteRule, TensorQuadrature, gauss_hermite_rule, hermite_eval, hermite_multi_eval, tensor_nodes
from .indices import (
    AdmissibleWeights,
    IndexSet,
    MultiIndex,
    SurrogateWeights,
    WeightModel,
    beta_weight,
    build_index_set,
    c_weight,
    check_downward_closed,
    index_set_metrics,
    rho_from_b,
    stechkin_check,
    surrogate_constants,
)
from .pc import (
    FunctionMap,
    MonteCarloEstimator,
    ParametricProblem,
    PCExpansion,
    PolySpec,
    TensorEstimator,
    compute_coefficient,
    compute_expansion,
    error_curve,
    evaluate_solution,
    fit_slope,
    summability_report,
    weighted_identity_check,
)
from .torus import (
    PeriodicField,
    PeriodicGrid,
    SolverConfig,
    TrigBasis,
    apply_operator,
    hnorm,
    solve_diffusion,
    synthesize,
)
from .verify import (
    HolomorphyParams,
    exp_moment_closed,
    exp_moment_mc,
    growth_bound_check,
    perturbation_check,
    strip_bound_probe,
)

__all__ = [name for name in dir() if not name.startswith("_")]
