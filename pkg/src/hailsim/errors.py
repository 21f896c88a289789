"""Exception types shared across the package."""


class HailsimError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(HailsimError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedModelError(HailsimError, ValueError):
    """The requested model family has no analytic form and no sampler."""


class ConfigError(HailsimError, ValueError):
    """A configuration file could not be parsed into a valid scenario.

    The message names the offending section and key.
    """


class ContractViolationError(HailsimError, RuntimeError):
    """A declared bound or invariant was violated at runtime (debug checks)."""


class NumericFaultError(HailsimError, RuntimeError):
    """A non-finite rate, residual, or clock was produced during simulation."""
