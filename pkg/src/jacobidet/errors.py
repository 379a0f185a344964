"""Exception types shared across the package."""


class DimensionError(ValueError):
    pass


class SymmetryError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


class LegendreConditionError(ValueError):
    """H_t is not negative-definite somewhere on [0, 1]."""


class NonRegularPointError(ArithmeticError):
    """The Gram matrix (equivalently the endpoint constraint) is degenerate."""


class CommutativityError(ValueError):
    pass


class RangeError(IndexError):
    pass
