"""Shared exception types."""


class OsflabError(Exception):
    """Base class for all package errors."""


class InvalidInputError(OsflabError, ValueError):
    """Malformed or dimension-inconsistent input."""


class IllConditionedError(OsflabError):
    """Numerically defective problem; carries the offending eigengap."""

    def __init__(self, message, eigengap=None):
        super().__init__(message)
        self.eigengap = eigengap


class SimulationError(OsflabError):
    """Trajectory blow-up; carries the step index where it happened."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ResourceError(OsflabError):
    """Requested construction would exceed sane memory/size limits."""


class DomainEscapeError(OsflabError):
    """Dynamics left the domain a construction is defined on."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DuplicateCenterError(OsflabError):
    """Too few distinct data points to fit the requested centers."""


class ProtocolError(OsflabError):
    """Streaming predictor observe/predict alternation violated."""


class ConfigError(OsflabError):
    """Config file or override parsing failure; carries a line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
