"""Seeded benchmark suites, JSON-lines persistence and plot-table emission."""
import csv
import dataclasses
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import problems, trajopt
from .core import BoxDomain, ObjectiveOracle, ksos_step, sample_uniform, surrogate_grid
from .errors import InvalidArgumentError, KsosError
from .kernels import KernelSpec
from .restarts import RestartSchedule, optimize
from .sdp import SolverOptions

KINDS = ("ro-bench", "to-bench", "init-bench", "solve-function")
RO_METHODS = ("kernelsos-sq", "kernelsos-nonsq", "best-sample", "local-from-gt")
INIT_METHODS = ("random", "best-of-random", "kernelsos")

# Per-kind defaults; anything set in the config file or on the command line wins.
_KIND_DEFAULTS = {
    "ro-bench": dict(kernel="gaussian", sigma=1.0, sigma_sq=1.4, lam=1e-3, samples=36,
                     restarts=1, decay=0.5, radius=1.0),
    "to-bench": dict(kernel="laplace", sigma=10.0, lam=1e-3, restarts=4, decay=0.5),
    "init-bench": dict(kernel="laplace", sigma=10.0, lam=1e-3, samples=100, restarts=0),
    "solve-function": dict(kernel="gaussian", sigma=0.5, lam=1e-4, samples=30, restarts=3,
                           decay=0.5, radius=1.0, function="two_basin"),
}


@dataclass
class ExperimentConfig:
    kind: str
    kernel: str = "gaussian"
    sigma: float = 1.0
    lam: float = 1e-3
    samples: int = 30
    restarts: int = 0
    decay: float = 0.5
    center: list = None
    radius: float = None
    epsilon: float = 1e-3
    newton_steps: int = 100
    seeds: list = field(default_factory=lambda: list(range(10)))
    output: str = "results.jsonl"
    # range-only
    noise_levels: list = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.2])
    anchor_count: int = 5
    sigma_sq: float = 1.4
    normalize_ro: bool = True
    grid_baseline: bool = True
    # trajectory optimization
    system: str = "single"
    horizon: int = 50
    control_weight: float = 1e-3
    torque_limit: float = None
    couples: list = field(default_factory=lambda: [[24, 4], [99, 4], [199, 9]])
    refine_iters: int = 20000
    refine_tol: float = 1e-3
    # analytic functions
    function: str = "two_basin"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        KernelSpec(self.kernel, scale=self.sigma)
        if self.kind == "ro-bench":
            KernelSpec(self.kernel, scale=self.sigma_sq)
        SolverOptions(self.epsilon, self.newton_steps)
        if not self.seeds:
            raise InvalidArgumentError("at least one seed is required")
        self.seeds = [int(s) for s in self.seeds]
        if self.system not in ("single", "double"):
            raise InvalidArgumentError("system must be 'single' or 'double'")
        if any(n < 0 for n in self.noise_levels):
            raise InvalidArgumentError("noise levels must be nonnegative")
        for N, w in self.couples:
            RestartSchedule([0.0], 1.0, int(w), self.decay, int(N), self.sigma, self.lam)
        if self.function not in _FUNCTIONS:
            raise InvalidArgumentError(f"unknown function {self.function!r}")
        if self.kind in ("ro-bench", "solve-function"):
            RestartSchedule([0.0], self.radius or 1.0, self.restarts, self.decay, self.samples,
                            self.sigma, self.lam)

    @classmethod
    def from_dict(cls, data, **overrides):
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        if "kind" not in data:
            raise InvalidArgumentError("config needs a 'kind'")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{**_KIND_DEFAULTS.get(data["kind"], {}), **data})

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), **overrides)

    def fingerprint(self):
        """All hyperparameters except seeds and output location."""
        d = dataclasses.asdict(self)
        d.pop("seeds")
        d.pop("output")
        return d

    def experiment_id(self):
        blob = json.dumps(self.fingerprint(), sort_keys=True).encode()
        return f"{self.kind}-{hashlib.sha256(blob).hexdigest()[:12]}"

    def solver_options(self):
        return SolverOptions(self.epsilon, self.newton_steps)


_FUNCTIONS = {
    "two_basin": (problems.two_basin, 1),
    "quartic": (problems.quartic_double_well, 1),
    "quadratic": (problems.quadratic(0.3), 1),
}


def _record(cfg, seed, method, metrics=None, error=None, **extra):
    rec = {"experiment": cfg.experiment_id(), "kind": cfg.kind, "seed": seed, "method": method,
           **extra, "status": "ok" if error is None else "error",
           "metrics": {k: float(v) for k, v in (metrics or {}).items()},
           "fingerprint": cfg.fingerprint()}
    if error is not None:
        rec["error"] = error
    elif not all(np.isfinite(v) for v in rec["metrics"].values()):
        rec.update(status="error", error="non-finite metric")
    return rec


def _guarded(cfg, seed, method, fn, **extra):
    try:
        return _record(cfg, seed, method, fn(), **extra)
    except (KsosError, ValueError, np.linalg.LinAlgError) as exc:
        return _record(cfg, seed, method, error=f"{type(exc).__name__}: {exc}", **extra)


# ------------------------------------------------------------------ range-only


def _ro_kernelsos(cfg, inst, seed, squared):
    cost = problems.ro_cost_sq if squared else problems.ro_cost_nonsq
    # Rescale to unit weights so lambda means the same thing at every noise level.
    scale = float(np.mean(inst.weights)) if cfg.normalize_ro else 1.0
    oracle = ObjectiveOracle(lambda x: float(cost(inst, x)) * scale, inst.dimension,
                             reentrant=True, batch_fn=lambda X: cost(inst, X) * scale)
    center = cfg.center if cfg.center is not None else np.zeros(inst.dimension)
    sched = RestartSchedule(center, cfg.radius, cfg.restarts, cfg.decay, cfg.samples,
                            cfg.sigma_sq if squared else cfg.sigma, cfg.lam)
    run = optimize(oracle, cfg.kernel, sched, cfg.solver_options(), seed=seed)
    return {"error": np.linalg.norm(run.best_point - inst.ground_truth),
            "value": run.best_value / scale, "evaluations": run.total_evaluations}


def _ro_best_sample(cfg, inst, seed):
    oracle = problems.ro_oracle(inst, squared=False)
    center = cfg.center if cfg.center is not None else np.zeros(inst.dimension)
    budget = (cfg.restarts + 1) * (cfg.samples + 1)
    x, v = problems.best_sample_baseline(oracle, BoxDomain(center, cfg.radius), budget,
                                         seed=seed, grid=cfg.grid_baseline)
    return {"error": np.linalg.norm(x - inst.ground_truth), "value": v,
            "evaluations": oracle.evaluation_counter}


def _ro_local(cfg, inst, seed):
    oracle = problems.ro_oracle(inst, squared=False)
    res = problems.local_refine(oracle, inst.ground_truth, tolerance=1e-9)
    return {"error": np.linalg.norm(res.point - inst.ground_truth), "value": res.value,
            "evaluations": oracle.evaluation_counter}


def run_ro_bench(cfg):
    rows = []
    for seed in cfg.seeds:
        for noise in cfg.noise_levels:
            inst = problems.generate_ro_instance(seed, cfg.anchor_count, noise)
            arms = {
                "kernelsos-sq": lambda: _ro_kernelsos(cfg, inst, seed, True),
                "kernelsos-nonsq": lambda: _ro_kernelsos(cfg, inst, seed, False),
                "best-sample": lambda: _ro_best_sample(cfg, inst, seed),
                "local-from-gt": lambda: _ro_local(cfg, inst, seed),
            }
            for method in RO_METHODS:
                rows.append(_guarded(cfg, seed, method, arms[method], noise=noise))
    return rows


# ---------------------------------------------------------------- trajectories


def to_problem(cfg):
    make = trajopt.single_pendulum if cfg.system == "single" else trajopt.double_pendulum
    kw = {"horizon": cfg.horizon}
    if cfg.torque_limit is not None:
        kw["torque_limit"] = cfg.torque_limit
    return trajopt.RolloutProblem(make(**kw), control_cost_weight=cfg.control_weight)


def _torque_box(cfg, problem):
    center = cfg.center if cfg.center is not None else np.zeros(problem.dimension)
    return center, cfg.radius or problem.params.torque_limit


def run_to_bench(cfg):
    problem = to_problem(cfg)
    ref = trajopt.to_cost(problem, np.zeros(problem.dimension))
    center, radius = _torque_box(cfg, problem)
    rows = []
    for seed in cfg.seeds:
        for N, w in cfg.couples:
            N, w = int(N), int(w)
            budget = (w + 1) * (N + 1)

            def arm():
                oracle = trajopt.as_oracle(problem)
                sched = RestartSchedule(center, radius, w, cfg.decay, N, cfg.sigma, cfg.lam)
                run = optimize(oracle, cfg.kernel, sched, cfg.solver_options(), seed=seed)
                return {"cost": run.best_value, "normalized_cost": run.best_value / ref,
                        "evaluations": run.total_evaluations}

            rows.append(_guarded(cfg, seed, "kernelsos", arm, samples=N, restarts=w, budget=budget))
    return rows


_INIT_SALT = 0x494E4954


def initial_guesses(cfg, problem, seed):
    """The three starting control sequences of the initialization study."""
    center, radius = _torque_box(cfg, problem)
    dom = BoxDomain(center, radius)
    oracle = trajopt.as_oracle(problem)
    single = sample_uniform(dom, 1, [_INIT_SALT, seed, 0])[0]
    pool = sample_uniform(dom, cfg.samples, [_INIT_SALT, seed, 1])
    pool_costs = oracle.evaluate_many(pool)
    best = pool[int(np.argmin(pool_costs))]
    spec = KernelSpec(cfg.kernel, scale=cfg.sigma)
    step = ksos_step(oracle, dom, spec, cfg.lam, cfg.samples, cfg.solver_options(),
                     seed=[_INIT_SALT, seed, 2])
    return {"random": single, "best-of-random": best, "kernelsos": step.chosen[0]}


def run_init_bench(cfg):
    problem = to_problem(cfg)
    rows = []
    for seed in cfg.seeds:
        try:
            starts = initial_guesses(cfg, problem, seed)
        except KsosError as exc:
            for method in INIT_METHODS:
                rows.append(_record(cfg, seed, method, error=f"{type(exc).__name__}: {exc}"))
            continue
        for method in INIT_METHODS:
            u0 = starts[method]

            def arm():
                t0 = time.perf_counter()
                res = trajopt.shooting_refine(problem, u0, cfg.refine_iters, cfg.refine_tol)
                return {"initial_cost": trajopt.to_cost(problem, u0), "final_cost": res.cost,
                        "iterations": res.iterations, "converged": res.converged,
                        "wall_time": time.perf_counter() - t0}

            rows.append(_guarded(cfg, seed, method, arm))
    return rows


def run_solve_function(cfg):
    fn, dim = _FUNCTIONS[cfg.function]
    center = cfg.center if cfg.center is not None else np.zeros(dim)
    rows = []
    for seed in cfg.seeds:
        def arm():
            oracle = ObjectiveOracle(fn, dim)
            sched = RestartSchedule(center, cfg.radius, cfg.restarts, cfg.decay, cfg.samples,
                                    cfg.sigma, cfg.lam)
            run = optimize(oracle, cfg.kernel, sched, cfg.solver_options(), seed=seed)
            return {"value": run.best_value, "evaluations": run.total_evaluations,
                    **{f"x{k}": v for k, v in enumerate(run.best_point)}}

        rows.append(_guarded(cfg, seed, "kernelsos", arm, function=cfg.function))
    return rows


RUNNERS = {
    "ro-bench": run_ro_bench,
    "to-bench": run_to_bench,
    "init-bench": run_init_bench,
    "solve-function": run_solve_function,
}


def run_experiment(cfg):
    return RUNNERS[cfg.kind](cfg)


# ----------------------------------------------------------------- persistence


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def write_results(rows, path):
    return _atomic_write(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))


def read_results(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ----------------------------------------------------------------- plot tables


def _ok(rows, kind=None):
    return [r for r in rows if r.get("status") == "ok" and (kind is None or r.get("kind") == kind)]


def _error_vs_noise(rows):
    groups = {}
    for r in _ok(rows, "ro-bench"):
        groups.setdefault((r["noise"], r["method"]), []).append(r["metrics"]["error"])
    header = ["noise", "method", "count", "median_error", "q25_error", "q75_error"]
    body = [[noise, method, len(v), np.median(v), np.quantile(v, 0.25), np.quantile(v, 0.75)]
            for (noise, method), v in sorted(groups.items())]
    return header, body


def _cost_vs_budget(rows):
    groups = {}
    for r in _ok(rows, "to-bench"):
        groups.setdefault((r["budget"], r["samples"], r["restarts"]), []).append(
            r["metrics"]["normalized_cost"])
    header = ["budget", "samples", "restarts", "count", "mean_normalized_cost", "std_normalized_cost"]
    body = [[b, n, w, len(v), np.mean(v), np.std(v)] for (b, n, w), v in sorted(groups.items())]
    return header, body


def _init_summary(rows):
    groups = {}
    for r in _ok(rows, "init-bench"):
        groups.setdefault(r["method"], []).append(r["metrics"])
    header = ["method", "count", "mean_final_cost", "median_final_cost", "mean_iterations",
              "median_iterations", "mean_wall_time"]
    body = []
    for method in sorted(groups):
        ms = groups[method]
        cost = [m["final_cost"] for m in ms]
        iters = [m["iterations"] for m in ms]
        body.append([method, len(ms), np.mean(cost), np.median(cost), np.mean(iters),
                     np.median(iters), np.mean([m["wall_time"] for m in ms])])
    return header, body


def _surrogate_grid(rows, resolution=41):
    """Rebuild the first-stage surrogate of each KernelSOS RO row from its fingerprint."""
    header = ["seed", "noise", "method", "x0", "x1", "surrogate"]
    body = []
    for r in _ok(rows, "ro-bench"):
        if not r["method"].startswith("kernelsos"):
            continue
        cfg = ExperimentConfig.from_dict(r["fingerprint"], seeds=[r["seed"]])
        squared = r["method"] == "kernelsos-sq"
        inst = problems.generate_ro_instance(r["seed"], cfg.anchor_count, r["noise"])
        cost = problems.ro_cost_sq if squared else problems.ro_cost_nonsq
        scale = float(np.mean(inst.weights)) if cfg.normalize_ro else 1.0
        oracle = ObjectiveOracle(lambda x: float(cost(inst, x)) * scale, 2,
                                 batch_fn=lambda X: cost(inst, X) * scale)
        center = cfg.center if cfg.center is not None else np.zeros(2)
        sched = RestartSchedule(center, cfg.radius, cfg.restarts, cfg.decay, cfg.samples,
                                cfg.sigma_sq if squared else cfg.sigma, cfg.lam)
        spec = KernelSpec(cfg.kernel, scale=sched.kernel_scale(0))
        run = optimize(oracle, cfg.kernel, sched, cfg.solver_options(), seed=r["seed"])
        pts, vals = surrogate_grid(run.steps[0], spec, resolution)
        body.extend([r["seed"], r["noise"], r["method"], p[0], p[1], v / scale]
                    for p, v in zip(pts, vals))
        break
    return header, body


VIEWS = {
    "error-vs-noise": _error_vs_noise,
    "cost-vs-budget": _cost_vs_budget,
    "init-summary": _init_summary,
    "surrogate-grid": _surrogate_grid,
}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def plot_table(rows, view):
    if view not in VIEWS:
        raise InvalidArgumentError(f"unknown view {view!r}; expected one of {sorted(VIEWS)}")
    header, body = VIEWS[view](rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in body:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit_plot_data(result_path, view, out_path=None):
    text = plot_table(read_results(result_path), view)
    if out_path is None:
        stem = os.path.splitext(os.fspath(result_path))[0]
        out_path = f"{stem}.{view}.csv"
    return _atomic_write(out_path, text)
