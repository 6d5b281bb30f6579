"""Periodic motion planning and orbital stabilization for underactuated systems.

The pipeline: pick a virtual holonomic constraint q = phi(theta), reduce the
dynamics to a scalar second-order equation that may cross a singularity, solve
the two-point boundary problem through that crossing, lift the scalar motion
back to a full state/input trajectory, then stabilize the resulting orbit with
a periodic LQR designed on the transverse linearization. A separate checker
certifies trajectories that no regular constraint can reproduce.
"""

from .errors import (
    BoundaryUnreachableError,
    ConditionCheckError,
    ConvergenceError,
    DomainError,
    ModelInvariantError,
    OutsideTubeError,
    UsageError,
    VhcplanError,
)
from .feasibility import (
    NoVhcCertificate,
    accessibility_det_closed_form,
    accessibility_det_numeric,
    candidate_dh,
    candidate_h,
    certify_no_regular_vhc,
)
from .mech import (
    MechanicalSystem,
    PhaseState,
    eval_accel,
    inverse_input,
    left_annihilator,
    pvtol_model,
    tic_toc_acceleration,
    tic_toc_reference,
)
from .sim import SimulationResult, orbit_error, run_closed_loop
from .singular_solver import (
    PeriodicScalarSolution,
    PeriodicTrajectory,
    ScalarSolution,
    escape_singularity,
    lift,
    make_periodic,
    singular_acceleration,
    solve_boundary,
)
from .transverse import (
    FamilyChart,
    GainSchedule,
    LtvModel,
    PeriodicMatrixSpline,
    TicTocChart,
    TransverseCoords,
    chart_invert,
    gramian,
    linearize,
    monodromy,
    periodic_lqr,
    to_transverse,
    wrap_angle,
)
from .vhc import (
    FamilyParameters,
    ParametricVhc,
    ReducedModel,
    SingularityReport,
    SingularPass,
    check_theorem1,
    family_reduced,
    family_vhc,
    find_family_parameters,
    reduce,
    reduced_coefficients,
    theorem2_scan,
    tic_toc_vhc,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryUnreachableError",
    "ConditionCheckError",
    "ConvergenceError",
    "DomainError",
    "FamilyChart",
    "FamilyParameters",
    "GainSchedule",
    "LtvModel",
    "MechanicalSystem",
    "ModelInvariantError",
    "NoVhcCertificate",
    "OutsideTubeError",
    "ParametricVhc",
    "PeriodicMatrixSpline",
    "PeriodicScalarSolution",
    "PeriodicTrajectory",
    "PhaseState",
    "ReducedModel",
    "ScalarSolution",
    "SimulationResult",
    "SingularPass",
    "SingularityReport",
    "TicTocChart",
    "TransverseCoords",
    "UsageError",
    "VhcplanError",
    "accessibility_det_closed_form",
    "accessibility_det_numeric",
    "candidate_dh",
    "candidate_h",
    "certify_no_regular_vhc",
    "chart_invert",
    "check_theorem1",
    "escape_singularity",
    "eval_accel",
    "family_reduced",
    "family_vhc",
    "find_family_parameters",
    "gramian",
    "inverse_input",
    "left_annihilator",
    "lift",
    "linearize",
    "make_periodic",
    "monodromy",
    "orbit_error",
    "periodic_lqr",
    "pvtol_model",
    "reduce",
    "reduced_coefficients",
    "run_closed_loop",
    "singular_acceleration",
    "solve_boundary",
    "theorem2_scan",
    "tic_toc_acceleration",
    "tic_toc_reference",
    "to_transverse",
    "wrap_angle",
]
