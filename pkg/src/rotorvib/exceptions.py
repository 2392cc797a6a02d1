"""Exception hierarchy.

Every error raised by the package derives from :class:`RotorVibError`.  The
``exit_code`` attribute is what the CLI returns when the error escapes a
command (2 config, 3 data, 4 numeric).
"""


class RotorVibError(Exception):
    exit_code = 3


# config / CLI
class ConfigInvalid(RotorVibError, ValueError):
    exit_code = 2


class SchemaMismatch(RotorVibError, ValueError):
    exit_code = 3


# ingest
class MalformedLine(RotorVibError, ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class RangeViolation(MalformedLine):
    pass


class UnknownSensor(MalformedLine):
    pass


class TimestampOrder(MalformedLine):
    pass


class MissingSensor(RotorVibError, ValueError):
    pass


# features
class EmptySeries(RotorVibError, ValueError):
    pass


class SeriesTooShort(RotorVibError, ValueError):
    pass


class LengthNotDivisible(RotorVibError, ValueError):
    pass


class ZeroSpectrum(RotorVibError, ArithmeticError):
    exit_code = 4


class DegenerateSpectrum(RotorVibError, ArithmeticError):
    exit_code = 4


# pipeline
class EmptyDataset(RotorVibError, ValueError):
    pass


class EmptyMatrix(EmptyDataset):
    pass


class SingleClass(RotorVibError, ValueError):
    pass


class KTooLarge(RotorVibError, ValueError):
    pass


class EmptyMask(RotorVibError, ValueError):
    pass


class UnknownFamily(RotorVibError, ValueError):
    pass


class LeakageError(RotorVibError, RuntimeError):
    """Raised when a fit would touch rows outside the training partition."""


# models
class EmptyTrainSet(RotorVibError, ValueError):
    pass


class LengthMismatch(RotorVibError, ValueError):
    pass


class NotTreeBased(RotorVibError, TypeError):
    pass


class PcaModelRejected(RotorVibError, ValueError):
    pass


class NoConvergence(RotorVibError, RuntimeWarning):
    exit_code = 4


class ClippingProfile(RotorVibError, ValueError):
    pass
