"""Range-only localization benchmark, analytic test functions and baselines."""
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .core import ObjectiveOracle, sample_uniform
from .errors import InvalidArgumentError

WEIGHT_FLOOR = 1e-6
_INSTANCE_SALT = 0x524F


@dataclass(frozen=True)
class RangeOnlyInstance:
    anchors: np.ndarray
    distances: np.ndarray
    weights: np.ndarray
    ground_truth: np.ndarray
    seed: int = None
    noise_std: float = None

    def __post_init__(self):
        for name in ("anchors", "distances", "weights", "ground_truth"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.anchors.ndim != 2 or len(self.anchors) != len(self.distances) != len(self.weights):
            raise InvalidArgumentError("anchors, distances and weights must have matching lengths")
        if np.any(self.weights <= 0):
            raise InvalidArgumentError("weights (noise variances) must be positive")

    @property
    def dimension(self):
        return self.anchors.shape[1]

    def to_dict(self):
        return {
            "anchors": self.anchors.tolist(),
            "distances": self.distances.tolist(),
            "weights": self.weights.tolist(),
            "ground_truth": self.ground_truth.tolist(),
            "seed": self.seed,
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["anchors"], d["distances"], d["weights"], d["ground_truth"],
                   d.get("seed"), d.get("noise_std"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def generate_ro_instance(seed, anchor_count=5, noise_std=0.0):
    """Random 2-D instance: anchors rescaled to a 2x2 bounding box centered at 0,
    target uniform in that box, noisy distances clamped at zero."""
    if anchor_count < 3:
        raise InvalidArgumentError("need at least three anchors")
    if noise_std < 0:
        raise InvalidArgumentError("noise_std must be nonnegative")
    rng = np.random.default_rng([_INSTANCE_SALT, int(seed)])
    raw = rng.uniform(0.0, 1.0, size=(anchor_count, 2))
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    anchors = 2.0 * (raw - lo) / (hi - lo) - 1.0
    target = rng.uniform(-1.0, 1.0, size=2)
    dist = np.linalg.norm(anchors - target, axis=1) + rng.normal(0.0, noise_std, size=anchor_count)
    dist = np.maximum(dist, 0.0)
    weights = np.full(anchor_count, max(noise_std**2, WEIGHT_FLOOR))
    return RangeOnlyInstance(anchors, dist, weights, target, seed, noise_std)


def _ranges(instance, X):
    X = np.asarray(X, dtype=np.float64)
    return np.linalg.norm(X[..., None, :] - instance.anchors, axis=-1)


def ro_cost_nonsq(instance, x):
    """Weighted sum of squared range residuals ``d_i - ||x - a_i||``.

    Works on a single point or a stack of points along the leading axes.
    """
    r = instance.distances - _ranges(instance, x)
    return np.sum(r * r / instance.weights, axis=-1)


def ro_cost_sq(instance, x):
    """Same with squared ranges, ``d_i^2 - ||x - a_i||^2``: quartic in ``x``."""
    r = instance.distances**2 - _ranges(instance, x) ** 2
    return np.sum(r * r / instance.weights, axis=-1)


def ro_oracle(instance, squared=False):
    cost = ro_cost_sq if squared else ro_cost_nonsq
    return ObjectiveOracle(lambda x: float(cost(instance, x)), instance.dimension,
                           reentrant=True, batch_fn=lambda X: cost(instance, X))


# analytic test functions


def quadratic(center=0.0):
    c = np.asarray(center, dtype=np.float64)
    return lambda x: float(np.sum((np.asarray(x) - c) ** 2))


def two_basin(x):
    """1-D function with a local minimum 0.05 at -0.5 and the global minimum 0 at 0.6."""
    x = float(np.asarray(x).ravel()[0])
    return min((x + 0.5) ** 2 + 0.05, (x - 0.6) ** 2)


def quartic_double_well(x):
    x = float(np.asarray(x).ravel()[0])
    return (x * x - 1.0) ** 2


# baselines


@dataclass
class LocalResult:
    point: np.ndarray
    value: float
    converged: bool
    iterations: int


def local_refine(cost, start, tolerance=1e-8, initial_step=0.1, max_iters=10000):
    """Compass search: poll +/- each axis, move on improvement, halve the step otherwise.

    ``cost`` is an :class:`ObjectiveOracle` or a plain callable.
    """
    x = np.atleast_1d(np.asarray(start, dtype=np.float64)).copy()
    fx = float(cost(x))
    step = float(initial_step)
    n = x.size
    it = 0
    while step >= tolerance:
        if it >= max_iters:
            return LocalResult(x, fx, False, it)
        it += 1
        moved = False
        for k in range(n):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[k] += sign * step
                fy = float(cost(y))
                if fy < fx:
                    x, fx, moved = y, fy, True
                    break
        if not moved:
            step *= 0.5
    return LocalResult(x, fx, True, it)


def grid_points(domain, count):
    """Regular grid with ``ceil(count ** (1/n))`` points per axis."""
    n = domain.dimension
    per_axis = int(np.ceil(count ** (1.0 / n) - 1e-9))
    if per_axis == 1:
        return domain.center[None, :].copy()
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    return np.array(list(itertools.product(*axes)))


def best_sample_baseline(oracle, domain, count, seed=0, grid=False):
    if count < 1:
        raise InvalidArgumentError("count must be positive")
    X = grid_points(domain, count) if grid else sample_uniform(domain, count, seed)
    vals = oracle.evaluate_many(X)
    i = int(np.argmin(vals))
    return X[i], float(vals[i])
