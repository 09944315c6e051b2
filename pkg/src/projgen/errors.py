"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates a documented hypothesis (range, shape, or regime gate)."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class VerificationError(RuntimeError):
    """A constructed object failed its own residual checks."""


class ClosureCapError(RuntimeError):
    """A span closure hit its dimension cap before reaching a fixpoint."""
