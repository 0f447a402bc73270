"""Exception taxonomy shared across the package.

Configuration/usage problems map to CLI exit code 2, numerical failures
to exit code 3.
"""


class GostbecError(Exception):
    pass


class ConfigurationError(GostbecError):
    """Bad config file, unknown branch label, inconsistent parameters."""


class UsageError(GostbecError):
    """Operation called with arguments violating its contract."""


class NumericalError(GostbecError):
    """Base class for solver/propagation/fit failures."""


class SolverError(NumericalError):
    """Newton iteration failed to converge.

    Carries the last residual norm for diagnostics.
    """

    def __init__(self, msg, residual_norm=None):
        super().__init__(msg)
        self.residual_norm = residual_norm


class DegenerateSolutionError(SolverError):
    """Newton converged to the trivial (zero) solution."""


class StepError(NumericalError):
    """A Crank-Nicolson step did not reach its target residual."""


class ConservationError(NumericalError):
    """N or E drifted beyond the abort threshold during propagation."""


class FitError(NumericalError):
    """Nonlinear least squares failed (singular normal equations, no decrease)."""


class WindowError(GostbecError):
    """Bad fit window or portrait window (empty, out of range, unbounded region)."""
