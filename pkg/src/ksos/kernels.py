"""Positive-definite kernels, Gram matrices and jittered Cholesky features."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import _accel
from .errors import InvalidArgumentError, SingularKernelError

FAMILIES = {"gaussian": _accel.GAUSSIAN, "laplace": _accel.LAPLACE, "polynomial": _accel.POLYNOMIAL}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    ``scale`` is the length-scale of the gaussian/laplace kernels,
    ``degree`` and ``offset`` parametrize ``(offset + <x, y>) ** degree``.
    """

    family: str = "gaussian"
    scale: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise InvalidArgumentError("polynomial degree must be a positive integer")
            if self.offset < 0:
                raise InvalidArgumentError("polynomial offset must be nonnegative")
        elif not self.scale > 0:
            raise InvalidArgumentError("kernel scale must be positive")

    def with_scale(self, scale):
        if self.family == "polynomial":
            return self
        return KernelSpec(self.family, float(scale), self.degree, self.offset)

    def to_dict(self):
        return {"family": self.family, "scale": self.scale, "degree": self.degree, "offset": self.offset}


def gaussian(scale):
    return KernelSpec("gaussian", scale=float(scale))


def laplace(scale):
    return KernelSpec("laplace", scale=float(scale))


def polynomial(degree, offset=1.0):
    return KernelSpec("polynomial", degree=int(degree), offset=float(offset))


def _as_points(points):
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgumentError("points must be a list of vectors")
    return arr


def cross_kernel(spec, X, Y):
    """Kernel matrix ``k(X[i], Y[j])`` between two point sets."""
    X, Y = _as_points(X), _as_points(Y)
    if X.shape[1] != Y.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return _accel.kernel_matrix(X, Y, FAMILIES[spec.family], spec.scale, spec.degree, spec.offset)


def eval_kernel(spec, x, y):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgumentError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(cross_kernel(spec, x[None, :], y[None, :])[0, 0])


def gram_matrix(spec, points):
    """Symmetric Gram matrix ``K[i, j] = k(x_i, x_j)``.

    A 1-D array is read as N scalar points.
    """
    X = _as_points(points)
    if X.shape[0] == 0:
        raise InvalidArgumentError("gram_matrix needs at least one point")
    return cross_kernel(spec, X, X)


@dataclass(frozen=True)
class JitterPolicy:
    initial: float = 1e-10
    growth: float = 10.0
    max_tries: int = 8

    def ladder(self):
        """Jitter values tried in order; the unassisted attempt comes first."""
        return [0.0] + [self.initial * self.growth**k for k in range(self.max_tries)]


@dataclass(frozen=True)
class FeatureFactorization:
    """Upper-triangular ``R`` with ``R.T @ R = K + jitter_used * I``.

    Column ``i`` of ``R`` is the feature vector of sample ``i``.
    """

    R: np.ndarray
    jitter_used: float
    sample_count: int

    def features(self, kvec):
        """Features of a new point from its kernel column ``k(x_i, x)``."""
        return solve_triangular(self.R, kvec, trans="T", lower=False)


def factorize(K, policy=None):
    """Cholesky-factor ``K`` adding the smallest jitter from ``policy`` that succeeds."""
    policy = policy or JitterPolicy()
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidArgumentError("K must be square")
    if not np.all(np.isfinite(K)):
        raise InvalidArgumentError("K has non-finite entries")
    n = K.shape[0]
    eye = np.eye(n)
    delta = 0.0
    for delta in policy.ladder():
        try:
            L = np.linalg.cholesky(K + delta * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return FeatureFactorization(np.ascontiguousarray(L.T), delta, n)
    raise SingularKernelError(f"Cholesky failed up to jitter {delta:g}", delta)
