"""Exception hierarchy.

Every error raised deliberately by the package derives from :class:`IpSaeError`.
The CLI maps the three families below onto its exit codes.
"""


class IpSaeError(Exception):
    """Base class for all package errors."""


class ConfigError(IpSaeError, ValueError):
    """Invalid arguments, shapes or configuration (CLI exit code 2)."""


class DataIOError(IpSaeError, OSError):
    """Unreadable, missing or malformed files (CLI exit code 3)."""


class NumericalError(IpSaeError, ArithmeticError):
    """A numerical contract could not be met (CLI exit code 4)."""


# -- linear algebra -----------------------------------------------------------

class DimensionMismatch(ConfigError):
    pass


class NotSquare(ConfigError):
    pass


class NotSymmetric(ConfigError):
    pass


class NonFinite(ConfigError):
    pass


class TooLarge(ConfigError):
    pass


class ZeroMatrix(ConfigError):
    pass


class SingularSystem(NumericalError):
    pass


class SingularNormalEquations(NumericalError):
    pass


class NotSPD(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


# -- data ---------------------------------------------------------------------

class MissingFile(DataIOError, FileNotFoundError):
    pass


class FormatError(DataIOError):
    def __init__(self, path, message, line=None, offset=None):
        where = str(path)
        if line is not None:
            where += f":{line}"
        if offset is not None:
            where += f" (byte {offset})"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.offset = offset


class InvariantViolation(ConfigError):
    pass


class EmptyClass(ConfigError):
    pass


class BadThreshold(ConfigError):
    pass


class EmptySeenClass(ConfigError):
    pass


class InfeasibleConfig(ConfigError):
    pass


class IndexOutOfRange(ConfigError, IndexError):
    pass


# -- model / evaluation -------------------------------------------------------

class NonPositiveLambda(ConfigError):
    pass


class UnseenLabelInTraining(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class EmptyCandidates(ConfigError):
    pass


class EmptyMatrix(ConfigError):
    pass


class SingleClass(ConfigError):
    pass
