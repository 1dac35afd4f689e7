"""Exception types shared across the package."""


class LmoptError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(LmoptError):
    """Operands have incompatible shapes."""


class NonFiniteValue(LmoptError):
    """A tensor contains NaN or infinity."""


class DegenerateGradient(LmoptError):
    """Gradient norm is below the oracle threshold; the direction is undefined."""


class SchemeDiverged(LmoptError):
    """A polynomial polar iteration left its stability region."""


class ParseError(LmoptError):
    """A text input (coefficient table or config file) could not be parsed.

    Carries the 1-based line number when one is available.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidInexactness(LmoptError):
    """A relative oracle error outside [0, 1) was passed to a formula that requires it."""


class MissingBlockPolicy(LmoptError):
    """A layer-wise run has a parameter block with no step policy or oracle assigned."""


class MissingCertificate(LmoptError):
    """A bound check needs a smoothness certificate the problem does not provide."""


class InsufficientGrid(LmoptError):
    """A coupling verdict was requested on a grid too small to support it."""


class ConfigError(LmoptError):
    """A run/sweep configuration is malformed or inconsistent."""
