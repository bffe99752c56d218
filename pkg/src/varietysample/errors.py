"""Exception types shared across the package."""


class VarietySampleError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VarietySampleError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class NotHomogeneousError(VarietySampleError, ValueError):
    pass


class PathBudgetExceeded(VarietySampleError):
    pass


class NumericalFailure(VarietySampleError):
    """A computation finished but the numerical outcome is unusable."""


class DegenerateNormalLocus(NumericalFailure):
    """Every path of a normal-locus solve ended singular; the base point is not generic."""


class EmptyVarietyError(NumericalFailure):
    pass


class InfiniteBottlenecks(NumericalFailure):
    pass


class UnsupportedInput(VarietySampleError, ValueError):
    pass


class CertificationError(VarietySampleError):
    pass
