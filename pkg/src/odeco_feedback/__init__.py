"""Closed-form analysis of ODECO polynomial systems under shared-basis linear feedback."""

from .certify import (
    BoundaryEquilibrium,
    ConvergesToZero,
    EscapesMinusInfinity,
    EscapesPlusInfinity,
    RoaCertificate,
    classify_mode_fate,
    escape_time,
    escape_time_mode,
    roa_membership,
    settling_time,
    settling_time_mode,
    threshold,
)
from .errors import (
    DimensionError,
    DomainError,
    InfeasibleDisturbanceError,
    PreconditionError,
    SpecError,
    UnsupportedRegimeError,
)
from .modal import (
    ModeParams,
    ModeSolution,
    closed_form_state,
    from_modal,
    mode_horizon,
    mode_value,
    solve_mode,
    to_modal,
)
from .robust import (
    DisturbanceEnvelope,
    RobustCertificate,
    dbar_max,
    hat_threshold,
    iss_envelope,
    robust_certificate,
    robust_set_membership,
    robust_threshold,
)
from .sim import Trajectory, basin_grid, integrate, make_paper_disturbance
from .tensor import (
    DenseSymTensor,
    OdecoSystem,
    dense_contract,
    load_system,
    materialize,
    odeco_contract,
    planar_example,
    scalar_form,
    validate_system,
    z_eigen_residual,
)

__version__ = "0.1.0"
