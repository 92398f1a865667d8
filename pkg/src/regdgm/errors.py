"""Exception hierarchy shared by all modules."""


class RegDGMError(Exception):
    """Base class for library errors."""


class InvalidInput(RegDGMError, ValueError):
    pass


class DegenerateInterval(RegDGMError):
    """The admissible beta interval is empty (unbiased pre-trained estimate)."""

    def __init__(self, lo, hi, message=None):
        self.lo = lo
        self.hi = hi
        super().__init__(message or f"admissible beta interval ({lo}, {hi}) is empty")


class DegenerateOptimum(RegDGMError):
    """Optimal regularization weight is unbounded (zero bias)."""

    def __init__(self, beta_limit=1.0, lambda_limit=float("inf"), message=None):
        self.beta_limit = beta_limit
        self.lambda_limit = lambda_limit
        super().__init__(
            message or "bias is zero: beta* -> 1 and lambda* -> inf (optimum not attained)"
        )


class InfeasibleAlpha(RegDGMError):
    pass


class NoFeasibleRoot(RegDGMError):
    pass


class QuadratureUnstable(RegDGMError):
    pass


class NumericalError(RegDGMError, ArithmeticError):
    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
