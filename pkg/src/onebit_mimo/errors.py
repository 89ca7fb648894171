"""Exception types raised by the library."""


class DegenerateCovarianceError(ValueError):
    """A covariance matrix has a zero or negative diagonal entry."""


class InvalidCovarianceError(ValueError):
    """Normalized correlations fall outside [-1, 1] beyond rounding slack."""


class DegeneratePrecoderError(ValueError):
    """A digital precoder has an all-zero row (the antenna carries only quantizer noise)."""


class DivergedError(RuntimeError):
    """The gradient projection produced a non-finite objective or gradient."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(
            message or f"gradient projection diverged at iteration {iteration}; "
            "retry with a smaller step"
        )


class UnknownSchemeError(ValueError):
    """A precoding scheme name is not recognised or not implemented."""
