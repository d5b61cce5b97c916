"""Exception types raised across the package."""


class SoftRankError(Exception):
    """Base class for all errors raised by softrank."""


class ParameterError(SoftRankError, ValueError):
    """An argument is outside its admissible range."""


class ShapeError(ParameterError):
    """Array shapes do not line up."""


class ZeroNormError(SoftRankError, ValueError):
    """A vector with zero Euclidean norm reached a cosine similarity."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EvaluationError(SoftRankError, ArithmeticError):
    """A function evaluated to a non-finite value."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class SchemaError(SoftRankError, ValueError):
    """An input document is malformed or misses required fields."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class TrainingDiverged(SoftRankError, FloatingPointError):
    """The training loss became non-finite."""
