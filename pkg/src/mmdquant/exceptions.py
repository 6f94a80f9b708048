"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class QuantError(Exception):
    exit_code = 1


class ConfigurationError(QuantError, ValueError):
    """Invalid combination of options (e.g. kernel/target pairing)."""

    exit_code = 2


class DataError(QuantError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class DegenerateDataError(DataError):
    pass


class SizeGuardError(QuantError, RuntimeError):
    """A combinatorial problem exceeds the enumeration limit."""

    exit_code = 4

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count
