"""Stationary modes and lifetimes of a gravito-optical surface trap BEC.

Ground states and topological coherent modes of the dimensionless
Gross-Pitaevskii equation in a trap combining a horizontal harmonic
confinement with a linear gravitational slope over an evanescent-wave
mirror, plus two independent lifetime estimates: Crank-Nicolson real
time propagation with exponential fitting, and eigenvalues of the
non-hermitian linearization with spectral portraits.
"""

from .config import ARTIFACT_VERSION, RunConfig
from .errors import (ConfigurationError, ConservationError,
                     DegenerateSolutionError, FitError, GostbecError,
                     NumericalError, SolverError, StepError, UsageError,
                     WindowError)
from .fitting import (FitResult, HalflifeTable, detect_onset,
                      fit_exponential, fit_power, fit_window_from_onset,
                      halflife_table)
from .grid import (Field, Grid, Params, build_stencil, effective_potential,
                   inner_product, make_grid, particle_number, read_snapshot,
                   write_snapshot, zero_field)
from .linear_modes import (airy_ai, airy_zero, axial_profile, eval_mode,
                           laguerre, linear_energy_skl, linear_mode,
                           radial_profile)
from .propagation import (PropagationRun, TimeSeries, cn_step, kappa,
                          propagate, virial_observables, visibility)
from .stability import (BdgMatrix, Portrait, SpectrumReport, assemble_blocks,
                        basis_coefficients, eigenvalue_error_bars,
                        linear_residual, spectral_portrait, spectrum)
from .stationary import (BRANCHES, Branch, StationaryState, branch_mode,
                         continue_branch, energy, gp_residual, newton_solve,
                         seed_state)

__version__ = "1.0.0"

__all__ = [
    "ARTIFACT_VERSION", "BRANCHES", "BdgMatrix", "Branch",
    "ConfigurationError", "ConservationError", "DegenerateSolutionError",
    "Field", "FitError", "FitResult", "GostbecError", "Grid",
    "HalflifeTable", "NumericalError", "Params", "Portrait",
    "PropagationRun", "RunConfig", "SolverError", "SpectrumReport",
    "StationaryState", "StepError", "TimeSeries", "UsageError",
    "WindowError", "airy_ai", "airy_zero", "assemble_blocks",
    "axial_profile", "basis_coefficients", "branch_mode", "build_stencil",
    "cn_step", "continue_branch", "detect_onset", "effective_potential",
    "eigenvalue_error_bars", "energy", "eval_mode", "fit_exponential",
    "fit_power", "fit_window_from_onset", "gp_residual", "halflife_table",
    "inner_product", "kappa", "laguerre", "linear_energy_skl",
    "linear_mode", "linear_residual", "make_grid", "newton_solve",
    "particle_number", "propagate", "radial_profile", "read_snapshot",
    "seed_state", "spectral_portrait", "spectrum", "virial_observables",
    "visibility", "write_snapshot", "zero_field",
]
