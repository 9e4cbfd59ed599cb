"""Exception hierarchy shared by all modules."""


class HpypError(Exception):
    """Base class for library errors."""


class ParameterError(HpypError, ValueError):
    """A parameter lies outside its admissible domain."""


class RangeError(HpypError, ValueError):
    """A size argument exceeds a configured computational cap."""


class BudgetError(HpypError, RuntimeError):
    """A sampler would exceed its configured cost budget."""


class ConsistencyError(HpypError, ArithmeticError):
    """A computed quantity violates an invariant it must satisfy."""
