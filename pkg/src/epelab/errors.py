"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument or input state breaks a documented precondition."""


class IterationLimitExceeded(RuntimeError):
    """A push loop ran past its safety cap.

    The cap is set far above any bound the algorithms should reach, so
    hitting it indicates an implementation bug or a pathological input,
    not normal slow convergence.
    """


class GenerationError(RuntimeError):
    """A resampling loop in the instance generator failed to converge."""
