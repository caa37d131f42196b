"""Shared exception types."""


class InvalidDimensionError(ValueError):
    """Dimension parameter outside the supported range (n >= 2)."""


class DimensionMismatchError(ValueError):
    """Two elements with different dimension parameters were combined."""


class MembershipError(ValueError):
    """A matrix failed the defining relations of so(n,1) / SO(n,1)."""


class BranchCutError(ArithmeticError):
    """Principal matrix logarithm undefined (eigenvalue on the cut)."""


class QuadratureError(RuntimeError):
    """A quadrature rule failed its exactness contract or is too coarse."""


class ParameterRangeError(ValueError):
    """A spectral/shearing parameter is outside its admissible open range."""


class PoleError(ArithmeticError):
    """Special-function evaluation hit a pole."""


class FactorizationError(RuntimeError):
    """Group-element factorization did not converge (outside the chart)."""


class HolderViolationError(ValueError):
    """A sampled time map violates the required Holder inequality."""
