"""Exception hierarchy shared across the package."""


class FairbidError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FairbidError, ValueError):
    """An argument is outside the domain of the operation."""


class ConfigError(FairbidError, ValueError):
    """A solver, scenario or experiment configuration is invalid."""


class StateError(FairbidError, IndexError):
    """A constraint state lies outside the solved table or is infeasible."""


class EdgeStateError(StateError):
    """The state is an edge state where the only allowed bid is zero."""


class NonConvergenceError(FairbidError, RuntimeError):
    """Value iteration hit its sweep cap before the tolerance was met."""

    def __init__(self, message, last_delta, trace=None):
        super().__init__(message)
        self.last_delta = last_delta
        self.trace = list(trace or [])


class ConstraintViolation(FairbidError, RuntimeError):
    """A recorded win broke the parity or ratio invariant."""


class InsufficientDataError(FairbidError, ValueError):
    """Not enough bid records to build the requested object."""


class BidLogFormatError(FairbidError, ValueError):
    """The bid log is not in the expected CSV layout."""


class PolicyError(FairbidError, ValueError):
    """The policy and ledger disagree about the constraint being enforced."""
