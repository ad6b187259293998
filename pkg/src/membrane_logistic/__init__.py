"""Steady states of two logistic populations coupled through a membrane.

The library discretizes the coupled elliptic system with a permeable
interface, computes the spectral thresholds governing existence of positive
steady states, solves the nonlinear steady problem by monotone iteration
and Newton continuation, and reproduces the limit regimes (penalization of
the crowding term, blow-up toward the refuge ceiling, convergence to the
minimal exterior solution).
"""

from .errors import (
    BracketFailure,
    DimensionMismatch,
    EmptyRefuge,
    InvalidGeometry,
    InvariantError,
    MaxIters,
    MembraneError,
    NegativePermeability,
    NegativeWeight,
    NoConvergence,
    NotContracting,
    NotStagnating,
    PatchFailure,
    RefugeTouchesBoundary,
    SchemaError,
    ShiftTooSmall,
    SingularJacobian,
    SingularOperator,
    TooCoarse,
    WindowViolation,
)
from .mesh import (
    GAMMA_INTERFACE,
    GAMMA_OUTER_1,
    GAMMA_OUTER_2,
    INTERIOR,
    Geometry,
    MembraneMesh,
    RefugeRegion,
    build_interval_mesh,
    build_rect_mesh,
    refine,
    restrict_to_refuge,
    single_box_mesh,
    tag_refuges,
)
from .problem import CoefficientField, FieldPair, ProblemSpec, as_field
from .operators import (
    BlockOperator,
    assemble_interface,
    assemble_stiffness,
    assemble_weighted_mass,
    compose_LF,
    solve_linear,
)
from .discretize import Discretization, discretize
from .spectral import (
    EigenResult,
    KLambdaSpec,
    LambdaInfinityResult,
    SigmaMap,
    discrete_ceiling,
    find_lambda_infinity,
    find_lambda_star,
    lambda_alpha,
    principal_eigenpair,
    second_eigenvalue,
    sigma_in_mu,
    sigma_of_lambda,
    spectral_radius_K,
)
from .steady import (
    BifurcationDiagram,
    BranchPoint,
    MonotoneBracket,
    build_bracket,
    constant_bracket,
    continuation,
    monotone_solve,
    newton_solve,
    subsolution_violation,
    supersolution_violation,
    two_sided_solve,
)
from .limits import (
    AlphaSweepRecord,
    BlowupRecord,
    LargeSolutionApprox,
    advance_branch,
    alpha_sweep,
    blowup_sweep,
    exterior_compact,
    exterior_convergence,
    minimal_large_solution,
)
from .config import RunConfig, config_from_dict, parse_config
from .runner import ResultEnvelope, emit, run
from .validate import InvariantRow, run_invariant_suite

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
