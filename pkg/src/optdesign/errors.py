"""Exception hierarchy shared by all optdesign modules."""

from __future__ import annotations


class OptDesignError(Exception):
    """Base class for all library errors."""


class ValidationError(OptDesignError, ValueError):
    """Inputs violate a contract: bad domain, shape, weights, or parameters."""


class DegenerateDesignError(ValidationError):
    """The requested optimum collapses to a design that cannot estimate the model."""


class SingularDesignError(OptDesignError, ValueError):
    """An operation that needs a non-singular information matrix received a singular one."""


class OptimizationError(OptDesignError, RuntimeError):
    """The optimizer could not produce any admissible design."""
