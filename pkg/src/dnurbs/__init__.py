"""Dynamic NURBS curves under constrained Lagrangian dynamics."""

from .assembly import (
    AssemblyContext,
    ElementPartition,
    GaussLegendreRule,
    PhysicsParams,
    SystemMatrices,
    assemble_cross_term,
    assemble_force_vector,
    assemble_matrices,
    gravity_field,
    partition_elements,
)
from .banded import BandedGeneral, BandedSymmetric
from .constraints import (
    ConstraintSpec,
    ReducedSystem,
    ReductionMap,
    build_reduction,
    pin_rows,
    reduce_system,
)
from .dynamics import (
    CGResult,
    DynamicsEngine,
    SimState,
    SolverConfig,
    StepDiagnostics,
    WeightPolicy,
    apply_weight_policy,
    initialize,
    solve_cg,
    step,
)
from .errors import (
    ConfigError,
    ConstraintSpecError,
    DegenerateWeightsError,
    DnurbsError,
    DomainError,
    InvalidKnotVectorError,
    NotPositiveDefiniteError,
    SimulationError,
    SolverDivergenceError,
    SolverError,
    UnsupportedKnotVectorError,
)
from .geometry import (
    GeneralizedState,
    IdentityReport,
    JacobianEval,
    eval_curve,
    eval_jacobian,
    eval_jacobian_u_derivatives,
    verify_jacobian_identities,
)
from .splines import (
    BasisEval,
    KnotVector,
    classify_knot_vector,
    eval_basis_many,
    eval_bspline_basis,
    eval_bspline_derivatives,
)

__version__ = "0.1.0"
