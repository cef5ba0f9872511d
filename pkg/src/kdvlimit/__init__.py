"""Zero-dispersion limit and small-dispersion expansions of generalized KdV equations."""

from .errors import (
    InvalidArgumentError,
    KdvLimitError,
    NumericalFailure,
    PastBreakingError,
    ResolutionError,
    SolverDivergenceError,
)
from .flux import (
    DispersionParams,
    FluxModel,
    PerturbationData,
    constant_perturbation,
    get_model,
    gkdv_invariants,
    kdv_model,
    map_coefficients,
    mapped_perturbation,
)
from .harness import ExpansionReport, SweepPlan, fit_order, load_plan, run_continuity_check, run_sweep
from .hopf import CriticalTime, HopfSolution, critical_time, solve_hopf
from .initial_data import make_datum
from .solver import SolverConfig, Trajectory, evolve, evolve_with_error_control
from .spectral import Field, Grid, make_grid, sobolev_norm, spectral_derivative
from .transport import (
    ExpansionCoefficients,
    kdv_hierarchy,
    solve_transport_general,
    solve_transport_kdv,
    taylor_reconstruct,
    v1_closed_form,
    v1_monotone_formula,
)

__version__ = "0.1.0"
