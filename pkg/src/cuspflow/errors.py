"""Exception hierarchy shared by all cuspflow modules."""


class CuspflowError(Exception):
    """Base class for every error raised by cuspflow."""


class DomainError(CuspflowError, ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(CuspflowError):
    """A trajectory reached the singular floor near the cusp."""


class StepFailureError(CuspflowError):
    """The adaptive integrator could not meet the requested tolerance."""


class NonReturnError(CuspflowError):
    """An excursion did not return to its entry level in the allotted time."""


class InsufficientDataError(CuspflowError, ValueError):
    """Too few samples, grid points or checkpoints for a fit or check."""


class NotApplicableError(CuspflowError):
    """A check was requested on an input excluded by its hypotheses."""


class ConfigError(CuspflowError, ValueError):
    """An experiment configuration failed validation."""
