"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class CapacityError(ValueError):
    """A scene holds more objects or bins than the descriptor layout allows."""


class ParseError(ValueError):
    """A serialized record could not be decoded."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class UnreachableError(ValueError):
    """An inverse-kinematics target lies outside the reachable annulus."""

    def __init__(self, message, distance):
        self.distance = float(distance)
        super().__init__(f"{message} (closest achievable distance {self.distance:.4f} m)")


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget."""


class LocalizationError(RuntimeError):
    """No usable object blob was found in a depth image."""


class NoObjectError(LocalizationError):
    pass


class NoiseBlobError(LocalizationError):
    pass


class InfeasibleTaskError(ValueError):
    """A task cannot be solved in the given scene."""


class TrainingDivergedError(RuntimeError):
    pass
