"""Time-dependent GKLS master equations: propagation and weak-relaxation certificates."""

from .certifier import (
    INCONCLUSIVE,
    STRONG_UNITAL,
    WEAK,
    CertificationReport,
    CommutantResult,
    certify,
    commutant_dimension,
    gronwall_log_bound,
    is_self_adjoint_set,
    lambda_max,
    spohn_bound_rhs,
)
from .generator import (
    GKLSGenerator,
    HamiltonianTerm,
    JumpTerm,
    SuperoperatorBlocks,
    TabulatedFunction,
    apply_generator,
    assemble_superoperator,
    check_trace_preservation,
    dissipator_only,
)
from .operators import (
    HermitianBasis,
    build_basis,
    commutator,
    embed_site,
    from_coefficients,
    hermitian_eigenvalues,
    hs_inner,
    random_density_matrix,
    tensor,
    to_coefficients,
    trace_distance,
)
from .otto import OttoCycleConfig, OttoEngine, build_otto_generator, jump_family, schedule, thermal_rate
from .propagator import (
    ConvergenceSummary,
    TrajectoryRecord,
    asymptotic_trajectory,
    fundamental_matrix,
    gronwall_envelope_check,
    integrate,
    propagate_ensemble,
    variation_of_constants,
)
from .tolerances import DEFAULT as DEFAULT_TOLERANCES
from .tolerances import Tolerances

__version__ = "0.1.0"
