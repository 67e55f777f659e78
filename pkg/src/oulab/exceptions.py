"""Exception hierarchy shared by all oulab modules."""


class OULabError(Exception):
    """Base class for every error raised by oulab."""


class StabilityError(OULabError, ValueError):
    """The drift matrix has an eigenvalue with non-negative real part."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SectorialityError(OULabError, ValueError):
    """A matrix has spectrum on the closed negative real axis."""


class NearSingularError(OULabError, ArithmeticError):
    """A resolvent was requested too close to the spectrum."""


class NumericalError(OULabError, ArithmeticError):
    """A factorization or solve failed."""


class CapabilityError(OULabError, ValueError):
    """The requested operation is not supported for these inputs."""


class CapacityError(OULabError, ValueError):
    """A resource limit (steps, paths, grid size) would be exceeded."""


class EmptyDomainError(OULabError, ValueError):
    """A grid mask or domain contains no admissible points."""


class ConfigError(OULabError, ValueError):
    """An experiment configuration is malformed."""
