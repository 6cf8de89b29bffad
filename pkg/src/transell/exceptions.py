"""Exception hierarchy shared by all transell modules."""


class TransellError(Exception):
    """Base class for every error raised by the package."""


class NotPositiveDefinite(TransellError, ValueError):
    def __init__(self, pivot_index, message=None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix is not positive definite (pivot {pivot_index})")


class IndexOutOfRange(TransellError, IndexError):
    pass


class InvalidMixing(TransellError, ValueError):
    pass


class NonMonotoneTransform(TransellError, ValueError):
    def __init__(self, coordinate, message=None):
        self.coordinate = coordinate
        super().__init__(message or f"transform {coordinate} is not strictly increasing")


class MomentUndefined(TransellError, ValueError):
    pass


class DegenerateColumn(TransellError, ValueError):
    def __init__(self, index=None, message=None):
        self.index = index
        super().__init__(message or f"column {index} is constant; Kendall's tau is undefined")


class NotConverged(TransellError, RuntimeError):
    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            message or f"solver did not converge after {iterations} sweeps (residual {residual:.3g})"
        )


class InvalidLambda(TransellError, ValueError):
    pass


class InfeasibleInput(TransellError, ValueError):
    pass


class InsufficientSample(TransellError, ValueError):
    pass


class DimensionTooLarge(TransellError, ValueError):
    pass


class GeneratorViolation(TransellError, ValueError):
    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"density generator is increasing at t={t:.6g}")


class DensityUnderflow(TransellError, ArithmeticError):
    pass
