"""Shrinking-hypercube restart driver."""
import json
from dataclasses import dataclass, field

import numpy as np

from .core import BoxDomain, ksos_step
from .errors import InvalidArgumentError, KsosError, RestartError
from .kernels import KernelSpec
from .sdp import SolverOptions


@dataclass(frozen=True)
class RestartSchedule:
    initial_center: np.ndarray
    initial_radius: float
    restarts: int = 0
    decay: float = 0.5
    samples_per_restart: int = 30
    initial_kernel_scale: float = 1.0
    lam: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "initial_center",
                           np.atleast_1d(np.asarray(self.initial_center, dtype=np.float64)))
        if not self.initial_radius > 0:
            raise InvalidArgumentError("initial radius must be positive")
        if self.restarts < 0:
            raise InvalidArgumentError("restarts must be nonnegative")
        if not 0 < self.decay < 1:
            raise InvalidArgumentError("decay must lie in (0, 1)")
        if self.samples_per_restart < 2:
            raise InvalidArgumentError("need at least two samples per restart")
        if not self.initial_kernel_scale > 0:
            raise InvalidArgumentError("kernel scale must be positive")
        if self.lam < 0:
            raise InvalidArgumentError("lambda must be nonnegative")

    def radius(self, stage):
        return self.initial_radius * self.decay**stage

    def kernel_scale(self, stage):
        return self.initial_kernel_scale * self.decay**stage

    @property
    def budget(self):
        return (self.restarts + 1) * (self.samples_per_restart + 1)


@dataclass
class StageRecord:
    stage: int
    center: np.ndarray
    radius: float
    kernel_scale: float
    c_lb: float
    candidate: np.ndarray
    candidate_value: float
    best_sample: np.ndarray
    best_sample_value: float
    newton_steps: int

    def to_dict(self):
        return {
            "stage": self.stage,
            "center": self.center.tolist(),
            "radius": self.radius,
            "kernel_scale": self.kernel_scale,
            "c_lb": self.c_lb,
            "candidate": self.candidate.tolist(),
            "candidate_value": self.candidate_value,
            "best_sample": self.best_sample.tolist(),
            "best_sample_value": self.best_sample_value,
            "newton_steps": self.newton_steps,
        }


@dataclass
class RunResult:
    best_point: np.ndarray
    best_value: float
    trace: list = field(default_factory=list)
    total_evaluations: int = 0
    steps: list = field(default_factory=list, repr=False)


# Salts keep the sampling streams disjoint from other seeded generators.
_STAGE_SALT = 0x6B736F73


def stage_seed(seed, stage):
    return np.random.SeedSequence([_STAGE_SALT, int(seed), int(stage)])


def optimize(oracle, kernel_family, schedule, opts=None, seed=0, kernel=None):
    """Run ``schedule.restarts + 1`` KernelSOS steps on shrinking hypercubes.

    Stage ``i`` samples ``B(z_i, r0 * decay**i)`` with kernel scale
    ``sigma0 * decay**i``; the next center is the better of the stage's
    candidate and its best sample. ``kernel`` may supply a full
    :class:`KernelSpec` (e.g. a polynomial offset); its scale is overridden.
    """
    opts = opts or SolverOptions()
    base = kernel or KernelSpec(kernel_family)
    center = oracle.clip_to_bounds(schedule.initial_center.copy())
    best_x, best_v = None, np.inf
    trace, steps = [], []
    start = oracle.evaluation_counter
    for stage in range(schedule.restarts + 1):
        domain = BoxDomain(center, schedule.radius(stage))
        spec = base.with_scale(schedule.kernel_scale(stage))
        try:
            res = ksos_step(oracle, domain, spec, schedule.lam, schedule.samples_per_restart,
                            opts, seed=stage_seed(seed, stage))
        except KsosError as exc:
            raise RestartError(f"stage {stage} failed: {exc}", trace) from exc
        bx, bv = res.best_sample
        for x, v in ((bx, bv), (res.minimizer_candidate, res.candidate_value)):
            if v < best_v:
                best_x, best_v = np.array(x), v
        trace.append(StageRecord(stage, domain.center.copy(), domain.radius, spec.scale,
                                 res.certificate.c_lb, res.minimizer_candidate.copy(),
                                 res.candidate_value, np.array(bx), bv,
                                 res.certificate.diagnostics.get("newton_steps_used", 0)))
        steps.append(res)
        center = oracle.clip_to_bounds(np.array(res.chosen[0]))
    return RunResult(best_x, float(best_v), trace, oracle.evaluation_counter - start, steps)


def write_trace_jsonl(run, path, **extra):
    with open(path, "w") as fh:
        for rec in run.trace:
            fh.write(json.dumps({**extra, **rec.to_dict()}) + "\n")
    return path
