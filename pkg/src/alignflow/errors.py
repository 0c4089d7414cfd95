"""Exception hierarchy.

Every error raised by the package derives from :class:`AlignflowError` so the
CLI can map families of failures onto exit codes.
"""


class AlignflowError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# kernels
class SingularAtZero(AlignflowError):
    pass


class NonIntegrable(AlignflowError):
    pass


class BadOrdering(AlignflowError):
    pass


class SignMismatch(AlignflowError):
    pass


class InvalidKernel(AlignflowError):
    pass


# potentials
class DimensionMismatch(AlignflowError):
    pass


class ConvexityViolation(AlignflowError):
    pass


# ensemble
class EmptyEnsemble(AlignflowError):
    pass


class NonpositiveWeight(AlignflowError):
    pass


class UnsupportedDescriptor(AlignflowError):
    pass


class IncompatiblePotential(AlignflowError):
    pass


# dynamics
class SeparationUnderflow(AlignflowError):
    pass


class StepSizeUnderflow(AlignflowError):
    pass


class OrderViolation(AlignflowError):
    pass


class SimulationFailure(AlignflowError):
    """Wraps a dynamics error with the time at which it happened."""

    def __init__(self, message, time=None, cause=None):
        super().__init__(message)
        self.time = time
        self.cause = cause


# metrics
class AdmissibilityViolation(AlignflowError):
    exit_code = 3


# ratefit
class InsufficientData(AlignflowError):
    exit_code = 4


class NonpositiveValue(AlignflowError):
    pass


class Inconclusive(AlignflowError):
    exit_code = 4


# odi oracle
class StateExit(AlignflowError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class EnvelopeViolation(AlignflowError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


# cli
class ConfigParse(AlignflowError):
    exit_code = 2


class ColumnMissing(AlignflowError):
    exit_code = 2
