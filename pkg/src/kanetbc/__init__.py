"""Ballistic quantum transport with the truncated Kane dispersion.

Solves stationary Schrodinger equations of order 2s on a finite device
domain with transparent boundary conditions, evaluates the generalized
probability current, and integrates Fermi-Dirac ensembles of incident
states (electron density and total electric current).
"""

from .dispersion import (
    DispersionModel,
    Mode,
    ModeKind,
    ModeSet,
    PhysicalParams,
    Side,
    DegenerateModes,
    NoBoundedBranch,
    kane_coefficients,
    kane_energy_exact,
    solve_wave_vectors,
    truncated_energy,
)
from .potential import (
    OrderingViolation,
    OutOfDomain,
    PiecewisePotential,
    Segment,
    constant_potential,
    paper_rtd_potential,
    rtd_potential,
)
from .scattering import (
    EvanescentIncident,
    FundamentalSet,
    GridSpec,
    IntegrationOverflow,
    MissingDerivatives,
    ScatteringError,
    ScatteringProblem,
    ScatteringSolution,
    SingularSystem,
    StepFailure,
    assemble_tbc_system,
    build_problem,
    integrate_fundamental_set,
    solve_scattering,
)
from .observables import (
    CurrentProfile,
    ZeroIncidentCurrent,
    boundary_currents,
    conservation_residual,
    current_density,
    current_profile,
    exterior_current,
    probability_current,
    transmission_reflection,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
