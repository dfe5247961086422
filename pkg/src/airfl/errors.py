"""Exception hierarchy shared by every airfl module."""


class AirflError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(AirflError, ValueError):
    pass


class NonHermitian(AirflError, ValueError):
    pass


class NotPositiveDefinite(AirflError, ValueError):
    pass


class NonPositiveDistance(AirflError, ValueError):
    pass


class SingularReflectionLoop(AirflError, ArithmeticError):
    pass


class ModeNone(AirflError, ValueError):
    pass


class PowerViolation(AirflError, ValueError):
    pass


class SingularR(AirflError, ArithmeticError):
    pass


class InfeasibleRisBudget(AirflError, ValueError):
    pass


class NoFeasiblePoint(AirflError, ValueError):
    pass


class BracketFailure(AirflError, ArithmeticError):
    pass


class InvalidConvexityParams(AirflError, ValueError):
    pass


class IndivisibleSharding(AirflError, ValueError):
    pass


class EmptyTestSet(AirflError, ValueError):
    pass


class IdxFormatError(AirflError, ValueError):
    """Base for IDX parsing failures."""


class BadMagic(IdxFormatError):
    pass


class TruncatedPayload(IdxFormatError):
    pass


class UnsupportedElementType(IdxFormatError):
    pass


class ConfigError(AirflError):
    pass


class UnknownKey(ConfigError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigTypeError(ConfigError, TypeError):
    pass


class MissingFile(ConfigError, FileNotFoundError):
    pass
