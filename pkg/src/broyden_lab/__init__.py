"""Broyden-family quasi-Newton methods with checkable convergence bounds."""

from .broyden import (
    DegenerateCurvatureError,
    NumericalBreakdownError,
    bfgs_update,
    broyden_det_ratio,
    broyden_update,
    dfp_update,
    inverse_broyden_update,
    omega,
    psi_potential,
    rank1_det,
    sigma_potential,
    theta,
    theta_from_products,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .general import (
    bound_general_superlinear,
    check_hessian_relations,
    check_locality,
    estimate_self_concordance,
    general_bound_report,
    integral_hessian,
    lambda_local,
    minimize_oracle,
    secant_product,
    shrink_to_locality,
    solve_general,
)
from .harness import report_summary, run
from .linops import (
    NotPositiveDefiniteError,
    SpdOperator,
    extreme_relative_eigenvalues,
    norm_dual,
    norm_primal,
    rel_det,
    rel_trace,
    relative_eigenvalues,
)
from .oracle import OracleCheckError, SmoothOracle, quadratic_oracle
from .problems import (
    SpectrumSpec,
    SplitMix64,
    fd_gradient,
    fd_hessian,
    make_logsumexp,
    make_quadratic,
    random_logsumexp,
)
from .quadratic import (
    GreedyComparison,
    QuadraticProblem,
    bound_linear,
    bound_superlinear_psi,
    bound_superlinear_sigma,
    greedy_comparison,
    greedy_direction,
    greedy_K,
    lambda_quad,
    quadratic_bound_report,
    solve_greedy_bfgs,
    solve_quadratic,
    superlinear_activation,
)
from .schedule import PhiSchedule, parse_schedule
from .trace import BoundReport, IterRecord, SolverTrace, fp_floor

__version__ = "0.1.0"
