from typing import (
    Any,
    Dict,
    Optional,
)


# Base class for every failure the lab reports; `exit_code` is what the CLI returns for it.
class SolitonLabException(Exception):
    exit_code = 1

    def __init__(self, message: str = 'Error Message not found.',
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def __str__(self):
        if not self.details:
            return self.message
        detail_str = ', '.join(f'{key}={self.details[key]}' for key in sorted(self.details))
        return f'{self.message} ({detail_str})'


class InvalidArgument(SolitonLabException):
    pass


class NoConvergence(SolitonLabException):
    exit_code = 3


class CertificationFailure(SolitonLabException):
    """
    A spectral or structural condition was checked numerically and found violated.
    """
    exit_code = 2


class DegeneratePairing(CertificationFailure):
    pass


class Inconclusive(SolitonLabException):
    """
    The resolution is insufficient to decide a condition either way.
    """
    exit_code = 3


class IllConditionedBasis(SolitonLabException):
    exit_code = 3


class BracketFailure(SolitonLabException):
    exit_code = 3


class BlowUpDetected(SolitonLabException):
    exit_code = 3

    def __init__(self, message: str, exit_time: float,
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.exit_time = exit_time


class LabPanic(Exception):

    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message + ' Please create an issue.'


class ConfigError(Exception):
    exit_code = 1

    def __init__(self, msg, lineno=None, col_offset=None):
        super().__init__(msg)
        self.lineno = lineno
        self.col_offset = col_offset


class SolitonLabWarning(UserWarning):
    pass


class AmbiguousCountWarning(SolitonLabWarning):
    pass


class WindowTruncatedWarning(SolitonLabWarning):
    pass


class ResolutionDriftWarning(SolitonLabWarning):
    pass
