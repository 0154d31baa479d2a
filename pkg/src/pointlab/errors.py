"""Exception types shared across pointlab modules."""


class DomainError(ValueError):
    """An argument lies outside the documented domain (non-finite, wrong sign, ...)."""


class InvalidMatrixError(ValueError):
    """A matrix fails its admission check (shape, finiteness, or unit determinant)."""


class PrecisionError(RuntimeError):
    """Statistical error bars are too wide for the requested decision."""


class ConsistencyError(RuntimeError):
    """Two independent certificates disagree (root count vs. phase winding, ...)."""


class NearEigenvalueError(RuntimeError):
    """Resolvent-type quantity requested too close to an eigenvalue."""


class EmptyProjectionError(RuntimeError):
    """Spectral projection onto the requested energy interval is empty."""


class FitError(RuntimeError):
    """Too few usable points to perform a regression."""


class NormUnderflowError(RuntimeError):
    """A vector or eigenfunction norm degenerated below representable scale."""


class UnsupportedModelError(RuntimeError):
    """Operation is restricted to a narrower model class than was supplied."""


class ConfigError(ValueError):
    """An experiment configuration field is missing or invalid."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
