"""Exception hierarchy shared by every netcost module."""


class NetcostError(Exception):
    """Base class for all toolkit errors."""


class InputError(NetcostError, ValueError):
    """Bad input data (parse failures, invalid values). CLI exit code 2."""


class ConfigError(NetcostError, ValueError):
    """Bad configuration (pricing, policy, profiles). CLI exit code 3."""


class InvalidTopology(InputError):
    pass


class AddressError(InputError):
    pass


class EmptyTrace(InputError):
    pass


class InvalidBucket(InputError):
    pass


class EmptySeries(InputError):
    pass


class InvalidDuration(InputError):
    pass


class InvalidPattern(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NegativeBytes(ParseError):
    pass


class SchemaError(ParseError):
    def __init__(self, field: str, detail: str = "missing required field"):
        self.field = field
        super().__init__(f"{detail}: {field!r}")


class InsufficientSamples(InputError):
    pass


class NonMonotonicTime(InputError):
    pass


class IrregularSampling(InputError):
    pass


class MissingRate(ConfigError):
    pass


class NonMonotone(ConfigError):
    pass
