"""Exception types shared across the package."""


class RigidFormError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RigidFormError, ValueError):
    """Malformed arguments: wrong shapes, non-finite entries, out-of-range parameters."""


class PreconditionError(RigidFormError):
    """The input is well formed but violates an operation's precondition."""


class IntegrationError(RigidFormError):
    """The integrator produced a non-finite state."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g} s)")
        self.time = time


class DivergenceError(IntegrationError):
    """An agent left the divergence guard ball."""


class ConfigError(RigidFormError):
    """A scenario file could not be turned into a simulation config."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line
        self.path = path
