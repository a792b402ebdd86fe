"""Spectrum of the quantum Rabi model from G-function zeros, with independent checks."""

from .errors import (
    GridOutsideDomain,
    LevelNotConverged,
    NoConvergence,
    NoConvergenceOfEigensolver,
    NoJointZero,
    NotFound,
    OutsideD0,
    PathTooCloseToSingularity,
    PoleProximity,
    RabiSpecError,
    SingularPoint,
    StepUnderflow,
)
from .gfunctions import (
    DiskDomain,
    GEvaluation,
    eval_G,
    eval_G_eps,
    eval_G_general,
    residue_at_pole,
)
from .odecheck import (
    VectorState,
    check_conditions,
    eps_conditions,
    integrate,
    series_state,
    theorem_check,
)
from .oracle import OracleResult, build_matrix, degeneracy_gap, eigensolve, solve
from .series import ModelParams, SeriesExpansion, compute_K, compute_K_eps, ode_residual
from .spectrum import (
    SpectrumLevel,
    find_exceptional,
    find_joint_zero,
    full_spectrum,
    scan_regular,
)

__version__ = "0.1.0"
