"""Exception hierarchy shared by all chronoline modules."""


class ChronolineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ChronolineError):
    """An input violated a documented precondition or invariant."""


class ParseError(ChronolineError):
    """A record file could not be parsed.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ContractError(ChronolineError):
    """A pluggable backend returned something that breaks its contract."""


class ProviderError(ChronolineError):
    """A remote provider failed after exhausting retries."""


class UndatableClusterError(ChronolineError):
    """A cluster has no date mentions and cannot be assigned a date."""


class StageGatingError(ChronolineError):
    """A pipeline stage was invoked before its predecessor completed."""


class NumericalError(ChronolineError):
    """A numerical routine could not produce a usable result."""
