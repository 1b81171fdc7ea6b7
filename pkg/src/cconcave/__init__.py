"""Numerical checks for c-concavity of potentials under the quadratic cost on model manifolds."""
from .cconcavity import (
    Certificate,
    CConcavityResult,
    ViolationWitness,
    admissible_gradient_bound,
    certify_main,
    certify_technical,
    check_three_claims,
    delta_of,
    empirical_cconcavity,
)
from .comparison import (
    check_alpha_inequality,
    check_convexity_radius,
    check_half_square_bound,
    check_hessian_comparison,
    check_sphere_identity,
)
from .counterexample import CounterexampleConfig, build_counterexample, build_f1, build_f2, verify_counterexample
from .errors import *  # noqa: F401,F403
from .fields import (
    AmbientLinear,
    Constant,
    DistSqPotential,
    NormalCoordField,
    RampProfile,
    ScalarField,
    Sum,
    fd_gradient,
    fd_hessian,
    oscillation,
    sup_gradient_norm,
)
from .grids import SampleGrid, default_grid
from .manifold import Euclidean, FlatTorus, Sphere, SymBilinearForm, distance, exp_map, log_map
from .transport import (
    Assignment,
    PointCloud,
    assignment_cost,
    check_cyclical_monotonicity,
    cost_matrix,
    mccann_map,
    optimal_assignment,
    verify_optimality,
)
