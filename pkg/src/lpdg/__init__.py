"""Lagrange-projection discontinuous Galerkin solver for 1d isentropic gas dynamics.

The update splits each step into an implicit acoustic stage, solved in
characteristic variables with a banded linear system, and an explicit upwind
transport stage, with positivity and energy-bound limiters in between.
"""

from .acoustic import (
    AcousticResult,
    AcousticSolveError,
    StarState,
    SubcharacteristicError,
    acoustic_flux,
    riemann_star,
    select_a,
    solve_acoustic_step,
)
from .basis import GaussLobattoBasis, gauss_lobatto
from .field import (
    ConservedState,
    FarField,
    InadmissibleStateError,
    LagrangeState,
    PERIODIC,
    Periodic,
    SolutionField,
    cell_mean,
    from_characteristic,
    interface_traces,
    project_initial,
    to_characteristic,
    to_conservative,
    to_lagrange,
)
from .integrator import (
    RKScheme,
    RetryExhaustedError,
    RunParams,
    SCHEMES,
    StageInfo,
    StepReport,
    advance,
    compute_dt,
    default_scheme,
    lpdg_stage,
)
from .limiter import (
    LimiterConfig,
    LimiterError,
    density_bounds,
    density_limit,
    entropy_bounds,
    entropy_limit,
    positivity_limit,
)
from .thermo import GasModel
from .transport import add_source, transport_step, upwind_state
from .verify import (
    ErrorReport,
    MonitorRecord,
    RiemannCase,
    VacuumError,
    error_norms,
    exact_riemann,
    manufactured_exact,
    manufactured_source,
    monitor_step,
    orders_between,
    riemann_exact_at,
    riemann_star_values,
)

__version__ = "0.1.0"

__all__ = [
    "AcousticResult",
    "AcousticSolveError",
    "ConservedState",
    "ErrorReport",
    "FarField",
    "GasModel",
    "GaussLobattoBasis",
    "InadmissibleStateError",
    "LagrangeState",
    "LimiterConfig",
    "LimiterError",
    "MonitorRecord",
    "PERIODIC",
    "Periodic",
    "RKScheme",
    "RetryExhaustedError",
    "RiemannCase",
    "RunParams",
    "SCHEMES",
    "SolutionField",
    "StageInfo",
    "StarState",
    "StepReport",
    "SubcharacteristicError",
    "VacuumError",
    "acoustic_flux",
    "add_source",
    "advance",
    "cell_mean",
    "compute_dt",
    "default_scheme",
    "density_bounds",
    "density_limit",
    "entropy_bounds",
    "entropy_limit",
    "error_norms",
    "exact_riemann",
    "from_characteristic",
    "gauss_lobatto",
    "interface_traces",
    "lpdg_stage",
    "manufactured_exact",
    "manufactured_source",
    "monitor_step",
    "orders_between",
    "positivity_limit",
    "project_initial",
    "riemann_exact_at",
    "riemann_star",
    "riemann_star_values",
    "select_a",
    "solve_acoustic_step",
    "to_characteristic",
    "to_conservative",
    "to_lagrange",
    "transport_step",
    "upwind_state",
]
