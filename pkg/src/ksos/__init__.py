"""Global black-box optimization with kernel sum-of-squares surrogates."""
from .core import (
    BoxDomain,
    ObjectiveOracle,
    StepResult,
    export_surrogate_grid,
    ksos_step,
    sample_uniform,
    surrogate_eval,
    surrogate_grid,
)
from .errors import (
    DegenerateRegularizationError,
    DivergedRolloutError,
    InvalidArgumentError,
    KsosError,
    ProblemSizeError,
    RestartError,
    SingularKernelError,
    SolverFailureError,
    StepFailureError,
)
from .kernels import (
    FeatureFactorization,
    JitterPolicy,
    KernelSpec,
    cross_kernel,
    eval_kernel,
    factorize,
    gaussian,
    gram_matrix,
    laplace,
    polynomial,
)
from .restarts import RestartSchedule, RunResult, StageRecord, optimize, write_trace_jsonl
from .sdp import SolverOptions, SosCertificate, SosProblem, reference_dense_solve, solve_dual_newton

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "DegenerateRegularizationError",
    "DivergedRolloutError",
    "FeatureFactorization",
    "InvalidArgumentError",
    "JitterPolicy",
    "KernelSpec",
    "KsosError",
    "ObjectiveOracle",
    "ProblemSizeError",
    "RestartError",
    "RestartSchedule",
    "RunResult",
    "SingularKernelError",
    "SolverFailureError",
    "SolverOptions",
    "SosCertificate",
    "SosProblem",
    "StageRecord",
    "StepFailureError",
    "StepResult",
    "cross_kernel",
    "eval_kernel",
    "export_surrogate_grid",
    "factorize",
    "gaussian",
    "gram_matrix",
    "ksos_step",
    "laplace",
    "optimize",
    "polynomial",
    "reference_dense_solve",
    "sample_uniform",
    "solve_dual_newton",
    "surrogate_eval",
    "surrogate_grid",
    "write_trace_jsonl",
]
