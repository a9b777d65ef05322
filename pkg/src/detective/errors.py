"""Exception hierarchy shared by all detective modules."""


class DetectiveError(Exception):
    pass


class DomainError(DetectiveError, ValueError):
    """An argument lies outside a function's mathematical domain."""


class ShapeError(DetectiveError, ValueError):
    pass


class UsageError(DetectiveError, ValueError):
    pass


class ConfigError(DetectiveError, ValueError):
    pass


class ParseError(DetectiveError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(DetectiveError, ArithmeticError):
    pass


class OracleError(DetectiveError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "oracle error"


class GradCheckError(DetectiveError):
    """A finite-difference probe produced a non-finite loss."""

    def __init__(self, param_index, coord):
        super().__init__(f"non-finite loss when perturbing parameter {param_index} at {coord}")
        self.param_index = param_index
        self.coord = coord
