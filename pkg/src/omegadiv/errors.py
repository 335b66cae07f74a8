"""Exception types raised by the solver pipeline."""


class OmegaDivError(Exception):
    """Base class for all package errors."""


class DomainError(OmegaDivError, ValueError):
    """Argument outside the domain of a mathematical function."""


class DegenerateSpectrumError(OmegaDivError):
    """psi(s) = q has a repeated root; perturb q slightly."""


class GridTooCoarseError(OmegaDivError):
    def __init__(self, message, suggested_h=None):
        super().__init__(message)
        self.suggested_h = suggested_h


class XMaxTooSmallError(OmegaDivError):
    """The table does not extend far enough to the right."""


class UnimodalityError(OmegaDivError):
    def __init__(self, message, samples=None):
        super().__init__(message)
        self.samples = samples


class OptimizationError(OmegaDivError):
    """A post-condition of the barrier optimizer failed."""


class VerificationError(OmegaDivError):
    """A variational inequality check failed."""


class SimulationFault(OmegaDivError):
    def __init__(self, message, path_dump=None):
        super().__init__(message)
        self.path_dump = path_dump


class ConfigError(OmegaDivError):
    """Invalid run configuration."""
