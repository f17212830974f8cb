"""Exception types raised on invalid input."""


class RejectedInput(ValueError):
    """Input violates an operation's precondition."""


class DomainError(ValueError):
    """Query time lies outside a spline's valid domain."""
