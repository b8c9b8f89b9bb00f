"""Exception hierarchy shared across the package."""


class KsosError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(KsosError, ValueError):
    pass


class SingularKernelError(KsosError):
    """Cholesky factorization failed even at the largest jitter rung."""

    def __init__(self, message, jitter):
        super().__init__(message)
        self.jitter = jitter


class ProblemSizeError(KsosError, ValueError):
    pass


class DegenerateRegularizationError(KsosError):
    pass


class SolverFailureError(KsosError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StepFailureError(KsosError):
    """A KernelSOS step failed; carries the evaluated samples for diagnosis."""

    def __init__(self, message, samples=None, values=None):
        super().__init__(message)
        self.samples = samples
        self.values = values


class RestartError(KsosError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class DivergedRolloutError(KsosError):
    def __init__(self, message, step):
        super().__init__(message)
        self.step = step
