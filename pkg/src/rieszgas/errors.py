"""Exception types raised across the package."""


class RieszGasError(Exception):
    """Base class for all package errors."""


class SingularityError(RieszGasError, ValueError):
    """A kernel or symbol was evaluated at its singular point."""


class ConditioningError(RieszGasError):
    """A spectral inversion is not well posed on the given grid."""


class PaddingError(RieszGasError):
    """Mass reaches the box boundary, so the zero-padded convolution is unreliable."""


class BoxTooSmallError(RieszGasError):
    """The equilibrium support touches the box boundary."""


class DivergenceError(RieszGasError):
    """A quantity diverges (non-confining potential, infinite norm, ...)."""


class NotConvergedError(RieszGasError):
    """An operation requires a converged solution and got an unconverged one."""


class LPCapError(RieszGasError):
    """Dual-norm LP support exceeds the configured cap."""


class ConfigError(RieszGasError):
    """Malformed experiment configuration.

    ``line`` is the 1-based line of the offending section or key when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line

    def __str__(self) -> str:
        msg = super().__str__()
        return f"line {self.line}: {msg}" if self.line is not None else msg
