"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class AssumptionViolation(ValueError):
    """A standing modelling assumption (positive occupation, bounded Q0, ...) fails."""


class LoadError(ValueError):
    """A game document could not be parsed; the message names the offending field."""


class NonConvergenceError(RuntimeError):
    """Value iteration hit its iteration cap."""
