"""Structure-preserving solver for the regularised time-discrete active Doi model in two dimensions."""

from .diagnostics import chemical_potential, entropy_ledger_row, order_parameters
from .driver import (Discretization, initialize_config, initialize_velocity, picard_step,
                     run_simulation)
from .errors import (ActiveDoiError, ConfigError, ConservationViolation, NonConvergence,
                     SolverFailure)
from .flow import assemble_flow, solve_flow
from .grids import NO_SLIP, PERIODIC, DomainGrid, OrientationGrid, moments
from .params import Params
from .potential import MollifierKernel, build_potential, mollify
from .smoluchowski import assemble_config, solve_config

__all__ = [
    "ActiveDoiError", "ConfigError", "ConservationViolation", "NonConvergence", "SolverFailure",
    "Discretization", "DomainGrid", "MollifierKernel", "NO_SLIP", "OrientationGrid", "PERIODIC",
    "Params", "assemble_config", "assemble_flow", "build_potential", "chemical_potential",
    "entropy_ledger_row", "initialize_config", "initialize_velocity", "moments", "mollify",
    "order_parameters", "picard_step", "run_simulation", "solve_config", "solve_flow",
]
