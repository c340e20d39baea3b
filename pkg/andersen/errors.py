"""Exception types raised across the package"""


class AndersenError(Exception):
    """Base class for all package errors"""


class ConfigurationError(AndersenError, ValueError):
    """Invalid configuration, dimension mismatch or unsupported combination"""


class InvalidStateError(AndersenError, ValueError):
    """A state or input vector holds non-finite values"""


class FitDomainError(AndersenError, ValueError):
    """Decay-rate fit requested on a window with non-positive means"""


class SimulationError(AndersenError, RuntimeError):
    """A simulation run failed (too many aborted replicas, solver failure)"""
