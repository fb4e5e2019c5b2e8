class InvalidArgument(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


class RejectedProblem(ValueError):
    """Problem data violates the well-posedness bound c - div(b)/2 >= c_s."""


class NotApplicable(RuntimeError):
    """Requested fast path cannot be used for this problem (e.g. cyclic upwind graph)."""
