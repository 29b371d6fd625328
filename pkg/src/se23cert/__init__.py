"""Certified log-linear tracking control for multi-rotors on the SE_2(3) group."""

from .dynamics import (
    GRAVITY,
    ZetaSystem,
    body_input,
    gravity_input,
    group_rhs,
    left_error,
    lift_inputs,
    omega_error,
    rigid_body_rate_rhs,
    zeta_rhs_closed_loop,
    zeta_rhs_exact,
    zeta_system,
)
from .se23 import (
    DRIFT,
    DRIFT_AD,
    ad_matrix,
    adjoint_matrix,
    group_exp,
    group_from_parts,
    group_inverse,
    group_log,
    group_parts,
    hat,
    input_transport,
    input_transport_apply,
    left_jacobian,
    left_jacobian_inv,
    rot_exp,
    rot_log,
    skew,
    unskew,
    vee,
)
from .sim import (
    ConstantInputReference,
    ContainmentReport,
    MonteCarloResult,
    SimLog,
    TrajectoryReference,
    containment_report,
    monte_carlo,
    rate_loop_monte_carlo,
    run_closed_loop,
    sample_disturbances,
    step_group,
    step_omega,
)
from .synthesis import (
    CertBundle,
    Ellipsoid,
    GroupSetSummary,
    InfeasibleError,
    VehicleParams,
    certify_cascade,
    certify_omega,
    dynamic_inversion,
    ellipsoid_nested,
    ellipsoid_to_group,
    invariant_ellipsoid,
    log_to_group_errors,
    lqr_gain,
    s_procedure_residual,
)
from .trajectory import (
    PolyTrajectory,
    ReferenceState,
    flatness_reference,
    min_snap,
    reference_envelope,
)

__all__ = [
    "CertBundle",
    "ConstantInputReference",
    "ContainmentReport",
    "DRIFT",
    "DRIFT_AD",
    "Ellipsoid",
    "GRAVITY",
    "GroupSetSummary",
    "InfeasibleError",
    "MonteCarloResult",
    "PolyTrajectory",
    "ReferenceState",
    "SimLog",
    "TrajectoryReference",
    "VehicleParams",
    "ZetaSystem",
    "ad_matrix",
    "adjoint_matrix",
    "body_input",
    "certify_cascade",
    "certify_omega",
    "containment_report",
    "dynamic_inversion",
    "ellipsoid_nested",
    "ellipsoid_to_group",
    "flatness_reference",
    "gravity_input",
    "group_exp",
    "group_from_parts",
    "group_inverse",
    "group_log",
    "group_parts",
    "group_rhs",
    "hat",
    "input_transport",
    "input_transport_apply",
    "invariant_ellipsoid",
    "left_error",
    "left_jacobian",
    "left_jacobian_inv",
    "lift_inputs",
    "log_to_group_errors",
    "lqr_gain",
    "min_snap",
    "monte_carlo",
    "omega_error",
    "rate_loop_monte_carlo",
    "reference_envelope",
    "rigid_body_rate_rhs",
    "rot_exp",
    "rot_log",
    "run_closed_loop",
    "s_procedure_residual",
    "sample_disturbances",
    "skew",
    "step_group",
    "step_omega",
    "unskew",
    "vee",
    "zeta_rhs_closed_loop",
    "zeta_rhs_exact",
    "zeta_system",
]

__version__ = "0.1.0"
