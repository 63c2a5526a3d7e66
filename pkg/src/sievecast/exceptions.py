"""Exception hierarchy.

Every error raised by the library derives from :class:`SievecastError` so the
CLI can map failures to exit codes without catching unrelated exceptions.
"""


class SievecastError(Exception):
    """Base class for all library errors."""


class ConfigError(SievecastError, ValueError):
    """Invalid parameter value (alpha outside (0, 1), bad scenario, ...)."""


class ParseError(SievecastError, ValueError):
    """Malformed text input, e.g. ragged CSV rows."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DataError(SievecastError, ValueError):
    """Well-formed input holding unusable values (NaN, inf, too few rows)."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class FormatError(SievecastError, ValueError):
    """Binary matrix file whose header does not match its payload."""


class DegenerateResponse(SievecastError, ValueError):
    """Response vector with zero variance; correlations are undefined."""


class OverdeterminedError(SievecastError, ValueError):
    """Least-squares fit requested with more predictors than the dof allow."""


class DofError(SievecastError, ValueError):
    """Adjusted R^2 requested with n - k - 1 < 1."""
