"""One KernelSOS step: sample, solve the SDP, recover a minimizer candidate."""
import csv
import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, KsosError, StepFailureError
from .kernels import cross_kernel, factorize, gram_matrix
from .sdp import SolverOptions, SosProblem, solve_dual_newton


@dataclass(frozen=True)
class BoxDomain:
    """Hypercube ``{x : max_k |x_k - center_k| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=np.float64)).copy()
        if center.ndim != 1:
            raise InvalidArgumentError("center must be a vector")
        if not self.radius > 0:
            raise InvalidArgumentError("radius must be positive")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dimension(self):
        return self.center.size

    @property
    def lower(self):
        return self.center - self.radius

    @property
    def upper(self):
        return self.center + self.radius

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.max(np.abs(x - self.center)) <= self.radius + tol)

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)


class ObjectiveOracle:
    """Evaluation-only access to a cost function.

    ``fn`` maps a point to a float. ``batch_fn``, if given, maps an (m, n)
    array to m costs and is used by :meth:`evaluate_many`. ``bounds`` is an
    optional hard domain ``(lower, upper)`` outside of which the oracle is not
    meant to be queried; restart centers are clipped to it. When ``reentrant``
    is true and ``workers > 1`` point-wise evaluations run on a thread pool.
    """

    def __init__(self, fn, dimension, reentrant=False, batch_fn=None, bounds=None, workers=1):
        self._fn = fn
        self._batch_fn = batch_fn
        self.dimension = int(dimension)
        self.reentrant = bool(reentrant)
        self.workers = int(workers)
        self.bounds = None
        if bounds is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=np.float64), (self.dimension,)) for b in bounds)
            self.bounds = (lo.copy(), hi.copy())
        self._count = 0
        self._lock = threading.Lock()

    @property
    def evaluation_counter(self):
        return self._count

    def _bump(self, k):
        with self._lock:
            self._count += k

    def _check(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.shape[-1] != self.dimension:
            raise InvalidArgumentError(f"expected dimension {self.dimension}, got {x.shape[-1]}")
        return x

    def evaluate(self, x):
        x = self._check(x)
        self._bump(1)
        return float(self._fn(x))

    __call__ = evaluate

    def evaluate_many(self, points):
        X = self._check(np.asarray(points, dtype=np.float64).reshape(-1, self.dimension))
        self._bump(len(X))
        if self._batch_fn is not None:
            return np.asarray(self._batch_fn(X), dtype=np.float64).reshape(len(X))
        if self.reentrant and self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                return np.fromiter(pool.map(self._fn, X), dtype=np.float64, count=len(X))
        return np.array([float(self._fn(x)) for x in X])

    def clip_to_bounds(self, x):
        if self.bounds is None:
            return x
        return np.clip(x, *self.bounds)


def sample_uniform(domain, count, seed):
    if count < 1:
        raise InvalidArgumentError("count must be positive")
    rng = np.random.default_rng(seed)
    pts = domain.center + domain.radius * rng.uniform(-1.0, 1.0, size=(count, domain.dimension))
    return np.clip(pts, domain.lower, domain.upper)


@dataclass
class StepResult:
    certificate: object
    samples: np.ndarray
    values: np.ndarray
    minimizer_candidate: np.ndarray
    candidate_value: float
    factorization: object
    domain: BoxDomain

    @property
    def best_sample(self):
        i = int(np.argmin(self.values))
        return self.samples[i], float(self.values[i])

    @property
    def chosen(self):
        """The better of the candidate and the best sample, as ``(point, value)``."""
        x, v = self.best_sample
        if self.candidate_value <= v:
            return self.minimizer_candidate, self.candidate_value
        return x, v


def ksos_step(oracle, domain, kernel, lam, count, opts=None, seed=0, samples=None):
    """Sample ``count`` points in ``domain``, fit the SOS surrogate and return the candidate.

    The oracle is called ``count + 1`` times. ``samples`` overrides random
    sampling with a fixed design.
    """
    opts = opts or SolverOptions()
    if oracle.dimension != domain.dimension:
        raise InvalidArgumentError("oracle and domain dimensions differ")
    if samples is None:
        if count < 2:
            raise InvalidArgumentError("a KernelSOS step needs at least two samples")
        X = sample_uniform(domain, count, seed)
    else:
        X = np.asarray(samples, dtype=np.float64).reshape(-1, domain.dimension)
    values = oracle.evaluate_many(X)
    try:
        fact = factorize(gram_matrix(kernel, X))
        cert = solve_dual_newton(SosProblem(fact.R, values, lam), opts)
    except KsosError as exc:
        raise StepFailureError(f"KernelSOS step failed: {exc}", X, values) from exc
    x_hat = domain.clip(cert.alpha @ X)
    cand_value = oracle.evaluate(x_hat)
    return StepResult(cert, X, values, x_hat, cand_value, fact, domain)


def surrogate_eval(result, kernel, query):
    """Surrogate ``c + phi(x)^T B phi(x)`` at one point or an (m, n) array of points."""
    Q = np.asarray(query, dtype=np.float64)
    dim = result.samples.shape[1]
    single = Q.ndim == 0 or (Q.ndim == 1 and Q.size == dim)
    Q = Q.reshape(-1, dim)
    kx = cross_kernel(kernel, result.samples, Q)
    phi = result.factorization.features(kx)
    if not np.all(np.isfinite(phi)):
        raise KsosError("back-substitution produced non-finite features")
    cert = result.certificate
    vals = cert.c_lb + np.einsum("ij,ik,kj->j", phi, cert.B_factor, phi)
    return float(vals[0]) if single else vals


def surrogate_grid(result, kernel, resolution):
    """Points of a regular grid over the step domain with their surrogate values."""
    dom = result.domain
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(dom.lower, dom.upper)]
    pts = np.array(list(itertools.product(*axes)))
    return pts, surrogate_eval(result, kernel, pts)


def export_surrogate_grid(result, kernel, resolution, path):
    pts, vals = surrogate_grid(result, kernel, resolution)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(pts.shape[1])] + ["surrogate"])
        for p, v in zip(pts, vals):
            w.writerow([repr(float(a)) for a in p] + [repr(float(v))])
    return path
