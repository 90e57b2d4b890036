"""Numerical laboratory for the focusing energy-critical wave equation

    u_tt - Lap u = |u|^{4/(N-2)} u,   N in {3, 4, 5}.

Closed-form ground state and boosted solitons, energy-space functionals on
radial and box grids, exact free waves for N = 3, a radial nonlinear solver
with blow-up detection, virial identities, modulation fits and
trajectory diagnostics.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .closed_forms import (
    ExactQuantities,
    SolitonParams,
    eval_soliton,
    eval_W,
    exact_quantities,
    ground_state_norms,
    pde_residual,
    reduced_soliton_integrals,
    sample_soliton,
)
from .diagnostics import (
    blowup_profile_report,
    ell_from_conserved,
    energy_matched_ground_state,
    perturbation_family,
    track_modulation,
    trajectory_from_states,
    trapping_monitor,
)
from .errors import (
    ConfigError,
    CritwaveError,
    InvalidInput,
    InvalidParameter,
    InvalidTime,
    NumericFailure,
    TruncationError,
    TruncationWarning,
    UndefinedVelocity,
    Undetermined,
    Unsupported,
)
from .fields import (
    conserved_quantities,
    dl_functional,
    energy_density,
    exterior_energy,
    first_moment_energy,
    integrate,
    norms,
    variational_region,
)
from .grids import BoxGrid3D, FieldState, RadialGrid
from .identities import Cutoff, IdentityTrace, identity_trace, phi_functional, pohozaev_check, zs_functionals
from .linear import equipartition_report, evolve_linear_radial3, kirchhoff_probe, linear_energy
from .modulation import ModulationFit, boost, estimate_report, fit, ortho_residuals, unboost
from .nonlinear import (
    SolverOptions,
    Trajectory,
    cfl_dt,
    detect_blowup,
    evolve,
    load_checkpoint,
    save_checkpoint,
)

eval_soliton_state = sample_soliton
