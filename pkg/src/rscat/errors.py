"""Exception types shared across the package."""


class RscatError(Exception):
    """Base class for package-specific errors."""


class ConfigurationError(RscatError):
    """A grid, spec, or config file violates a documented invariant."""


class FieldFormatError(RscatError):
    """A field file is malformed (bad magic, version, kind, or truncation)."""


class DataCoverageError(RscatError):
    """Far-field or near-field data is missing required mesh frequencies."""

    def __init__(self, message, gaps=()):
        super().__init__(message)
        self.gaps = tuple(gaps)


class SolverDivergenceError(RscatError):
    """Born iteration is expanding: the configuration is outside the contraction regime."""

    def __init__(self, message, contraction=None):
        super().__init__(message)
        self.contraction = contraction


class SolverConvergenceError(RscatError):
    """Iteration budget exhausted before the requested tolerance was met."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class OracleError(RscatError):
    """A brute-force oracle could not certify its own tolerance."""
