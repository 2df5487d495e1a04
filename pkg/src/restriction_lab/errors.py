"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(LabError, ValueError):
    """Invalid sizes, ranges or options."""


class DegenerateInputError(LabError, ValueError):
    """Zero function where a nonzero one is required."""


class SingularPointError(LabError, ValueError):
    """Evaluation requested at a singular point."""


class IntegrabilityError(LabError, ValueError):
    """Kernel or weight is not integrable."""


class AdmissibilityError(LabError, ValueError):
    """Input violates the admissibility conditions of an operation."""


class SignError(LabError, ValueError):
    """Negative values where nonnegative ones are required."""


class ResolutionError(LabError, RuntimeError):
    """A grid or quadrature is too coarse for the requested accuracy."""


class DecompositionUnderflow(LabError, RuntimeError):
    """The epsilon halving loop ran below the floating point floor."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SearchDivergence(LabError, RuntimeError):
    """Damped search decreased the functional for too many steps in a row."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
