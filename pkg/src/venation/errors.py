"""Exception types for numerical failure modes.

ValueError/KeyError are used for bad arguments and unknown names; the classes
here mark failures of the numerics at runtime so callers (and the CLI exit
codes) can tell the two apart.
"""


class NumericsError(RuntimeError):
    """Base class for runtime numerical failures."""


class NonFiniteError(NumericsError):
    """A field picked up NaN or Inf values."""


class SolverConvergenceError(NumericsError):
    """Krylov pressure solve missed its tolerance within the iteration cap."""


class PivotError(NumericsError):
    """A line solve hit a zero or sign-degenerate pivot (time step too large)."""


class SingularCoefficientError(NumericsError):
    """Metabolic coefficient is singular (gamma < 2 with epsilon = 0 at |C| = 0)."""


class EllipticityError(NumericsError):
    """Permeability lost pointwise positivity; Poisson assembly refused."""
