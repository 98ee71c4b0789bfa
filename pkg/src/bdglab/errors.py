"""Exception hierarchy shared by all modules."""


class BdgLabError(Exception):
    """Base class for errors raised by bdglab."""


class InvalidArgument(BdgLabError, ValueError):
    """An argument violates a documented precondition."""


class ContractViolation(BdgLabError):
    """An operation was invoked on an object that does not meet its contract,
    e.g. an (H1)-gated routine called with a quadratic generator."""


class NumericalFailure(BdgLabError, ArithmeticError):
    """A numerical step failed (rank-deficient regression, non-finite values)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DegenerateRatio(NumericalFailure):
    """A moment ratio was requested with a vanishing denominator."""


class ConfigError(BdgLabError):
    """The experiment configuration is unreadable or fails schema validation."""
