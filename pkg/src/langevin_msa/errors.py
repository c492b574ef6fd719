"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class StabilityError(ValueError):
    """Step size outside the stability region of the target."""


class OutOfCertifiedRangeError(ValueError):
    """Step size larger than the threshold for which a bound is certified."""


class UnsupportedOperationError(NotImplementedError):
    """The potential lacks an evaluator the operation needs."""


class NotReachedError(RuntimeError):
    """A search hit its iteration cap without meeting the tolerance."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class NumericalDivergenceError(FloatingPointError):
    """A chain produced a non-finite state.

    ``step`` is the iteration index at which the state stopped being finite and
    ``replica`` the global index of the first offending chain (``None`` when the
    caller works on a single vector).
    """

    def __init__(self, step, replica=None, message=None):
        self.step = step
        self.replica = replica
        if message is None:
            where = f"step {step}" if replica is None else f"replica {replica}, step {step}"
            message = f"non-finite state at {where}"
        super().__init__(message)
