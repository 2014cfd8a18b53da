"""Trajectory unraveling of positive Markovian open quantum dynamics.

The package integrates stochastic pure-state trajectories (diffusive and
jump) whose ensemble average reproduces a master equation, for every
positivity-preserving generator, including those without a completely
positive (jump-operator) representation.  Everything is phrased in terms
of two invariant objects computed at the current state: the transition
rate operator and the frictional drift.
"""
from .ensemble import (
    DensitySeries,
    ValidationReport,
    ensemble_average,
    integrate_master_equation,
    mc_error_series,
    run_ensemble,
    trace_distance,
    validate_unraveling,
)
from .generators import (
    GeneratorClass,
    KossakowskiData,
    LindbladData,
    Liouvillian,
    build_kossakowski,
    build_lindblad,
    check_positivity,
    choi_matrix,
    is_cp_generator,
    load_generator,
    save_generator,
)
from .noise import (
    Increment,
    NoiseSpec,
    build_S_from_s,
    explicit_spec,
    qsd_spec,
    sample_increment,
    sample_increments,
    validate_noise_spec,
)
from .rate_structures import (
    RateStructure,
    compute_L,
    compute_rate_structure,
    kossakowski_pair_check,
    min_transverse_rate,
    reconstruct_rhs,
)
from .trajectories import (
    CpQsd,
    Diffusive,
    Jump,
    JumpAccumulator,
    NotPositiveAtState,
    TrajectoryConfig,
    TrajectoryRecord,
    cp_qsd_step,
    diffusive_step,
    jump_step,
    run_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "DensitySeries",
    "ValidationReport",
    "ensemble_average",
    "integrate_master_equation",
    "mc_error_series",
    "run_ensemble",
    "trace_distance",
    "validate_unraveling",
    "GeneratorClass",
    "KossakowskiData",
    "LindbladData",
    "Liouvillian",
    "build_kossakowski",
    "build_lindblad",
    "check_positivity",
    "choi_matrix",
    "is_cp_generator",
    "load_generator",
    "save_generator",
    "Increment",
    "NoiseSpec",
    "build_S_from_s",
    "explicit_spec",
    "qsd_spec",
    "sample_increment",
    "sample_increments",
    "validate_noise_spec",
    "RateStructure",
    "compute_L",
    "compute_rate_structure",
    "kossakowski_pair_check",
    "min_transverse_rate",
    "reconstruct_rhs",
    "CpQsd",
    "Diffusive",
    "Jump",
    "JumpAccumulator",
    "NotPositiveAtState",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "cp_qsd_step",
    "diffusive_step",
    "jump_step",
    "run_trajectory",
    "__version__",
]
