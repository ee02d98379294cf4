"""Pseudo-spectral channel solver for fast-rotating, strongly stratified
Boussinesq flow, its generalized potential-vorticity formulation, and the
resonant quasi-geostrophic limit system."""

from .grid import ChannelGrid, DimensionMismatchError, apply_diff
from .harness import (
    ConfigError,
    InstabilityError,
    RunConfig,
    run_cross_validation,
    run_eps_sweep,
    run_linear_validation,
    run_simulation,
    run_wellprepared_comparison,
)
from .initial import balanced_state, generate_initial, random_state, single_mode_state
from .integrators import (
    IntegratorConfig,
    rotation_phase,
    stable_dt,
    step_eps_gpv,
    step_eps_primitive,
    step_limit,
)
from .norms import (
    boundary_sobolev_norm,
    energy_functional,
    l2_energy,
    norm_l2,
    profile_sobolev_norm,
    sobolev_norm,
)
from .snapshot import SnapshotError, inspect_snapshot, read_snapshot, write_snapshot
from .states import (
    DiagnosticsRecord,
    FastComponents,
    FastPair,
    GPVState,
    LimitState,
    PrimitiveState,
    validate_gpv,
    validate_primitive,
)
from .tendencies import (
    GPVTendency,
    LimitTendency,
    gpv_tendency,
    limit_N_phi,
    limit_N_psi,
    limit_N_z,
    limit_tendency,
    nonlinear_N1,
    nonlinear_N2,
    nonlinear_N3,
    primitive_tendency,
)
from .transform import (
    GPVConstraintError,
    compose_approximation,
    extract_gpv,
    fast_filter,
    fast_unfilter,
    limit_from_gpv,
    limit_reconstruct_fast,
    limit_reconstruct_slow,
    reconstruct_primitive,
)

__version__ = "0.1.0"
