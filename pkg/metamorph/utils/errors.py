"""Exception hierarchy shared by all metamorph modules."""

from typing import Optional


class MetamorphError(Exception):
    """Base class for errors raised by the library."""
    pass


class InvalidInputError(MetamorphError, ValueError):
    """Raised for malformed inputs (dimensions, channel counts, indices)."""
    pass


class ParameterError(MetamorphError, ValueError):
    """Raised when model parameters violate their admissibility conditions."""
    pass


class InadmissibleStateError(MetamorphError):
    """Raised when a deformation has non-positive Jacobian determinant."""
    pass


class ConvergenceError(MetamorphError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class NonContractiveError(MetamorphError):
    """Raised when a time segment cannot be inverted by fixed-point iteration."""

    def __init__(self, message: str, segment: int, contraction: Optional[float] = None):
        super().__init__(f"segment {segment}: {message}")
        self.segment = segment
        self.contraction = contraction


class DeformationFileError(MetamorphError):
    """Raised for malformed deformation files."""
    pass


class SweepError(MetamorphError):
    """Wraps a failure inside an alternation sweep with the sweep index."""

    def __init__(self, sweep: int, cause: Exception):
        super().__init__(f"sweep {sweep}: {cause}")
        self.sweep = sweep
        self.cause = cause


class ImageFileError(MetamorphError, OSError):
    """Raised when an image cannot be read or written."""
    pass
