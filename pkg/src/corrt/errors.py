"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError family exits 3, the
numerical family (solver, estimation, statistic, convergence, harness)
exits 4. Argument errors are left to argparse (exit 2).
"""


class CorrtError(Exception):
    """Base class for all package errors."""


class DataError(CorrtError, ValueError):
    """Input data is malformed: bad shapes, missing values, bad columns."""


class ConstructionError(CorrtError, ValueError):
    """A regression program cannot be built from the given data."""


class SolverError(CorrtError, RuntimeError):
    """The LP solver failed to terminate cleanly (cycling, iteration cap)."""


class EstimationError(CorrtError, RuntimeError):
    """An adaptive fit could not be produced (e.g. fallback infeasible)."""


class DegenerateStatisticError(CorrtError, RuntimeError):
    """The self-normalized denominator vanished; the test is undefined."""


class ConvergenceError(CorrtError, RuntimeError):
    """An iterative routine hit its cap without meeting its tolerance."""

    def __init__(self, message, kkt_violation=None):
        super().__init__(message)
        self.kkt_violation = kkt_violation


class HarnessError(CorrtError, RuntimeError):
    """A Monte Carlo run broke systematically (too many failed reps)."""
