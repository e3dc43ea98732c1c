"""Exception hierarchy shared by all engines."""


class BVError(Exception):
    """Base class for every error raised by :mod:`bvfeyn`."""


class TruncationMismatch(BVError):
    pass


class ModelError(BVError):
    """The (a, b) data does not define a valid model."""


class SingularMatrix(ModelError):
    pass


class AsymmetricTensor(ModelError):
    pass


class QuadraticInteraction(ModelError):
    pass


class NonScalarInput(BVError):
    """An expectation was requested for an element with xi factors."""


class InternalError(BVError):
    """The rewrite loop exceeded its step budget (an implementation bug)."""


class TooLarge(BVError):
    """A brute-force routine refused an input above its size cap."""


class ArityMismatch(BVError):
    pass


class ParseError(BVError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
