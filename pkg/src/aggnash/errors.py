"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with arguments violating its precondition."""


class ConfigError(ValueError):
    """A run configuration or setup is invalid."""


class NonConvergenceError(RuntimeError):
    """An iterative method stopped before reaching its tolerance.

    The last iterate and its residual are kept so callers can retry or inspect.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class FeasibilityError(RuntimeError):
    """An integrated action left its constraint set beyond tolerance."""

    def __init__(self, message, step=None, player=None, distance=None):
        super().__init__(message)
        self.step = step
        self.player = player
        self.distance = distance


class InsufficientDataError(ValueError):
    """Too few usable samples for a fit."""
