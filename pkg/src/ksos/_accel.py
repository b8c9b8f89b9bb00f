"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``KSOS_NUMBA`` is not set to a
false value (``0``, ``false``, ``no``, ``off``). Both paths are always importable
under explicit names so tests and the benchmark can compare them directly.
"""
import os

import numpy as np

_FALSE = ("0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("KSOS_NUMBA", "1").strip().lower() not in _FALSE

# Squared distances below this are treated as exact coincidence.
DIST_FLOOR = 1e-15

GAUSSIAN, LAPLACE, POLYNOMIAL = 0, 1, 2

# Layout of the packed pendulum parameter vector used by the rollout kernels.
P_M1, P_M2, P_L1, P_L2, P_B1, P_B2, P_G, P_DT, P_UMAX = range(9)

_numba_opts = dict(nopython=True, nogil=True, cache=True, fastmath=False)


def _jit(fn):
    if numba is None:  # pragma: no cover
        return fn
    return numba.jit(**_numba_opts)(fn)


# ---------------------------------------------------------------- gram matrix


def kernel_matrix_numpy(X, Y, family, scale, degree, offset):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if family == POLYNOMIAL:
        return (offset + np.einsum("ik,jk->ij", X, Y)) ** degree
    diff = X[:, None, :] - Y[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    d2[d2 < DIST_FLOOR] = 0.0
    if family == GAUSSIAN:
        return np.exp(-d2 / scale**2)
    return np.exp(-np.sqrt(d2) / scale)


def _kernel_matrix_loops(X, Y, family, scale, degree, offset):
    n, m, dim = X.shape[0], Y.shape[0], X.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            if family == POLYNOMIAL:
                s = 0.0
                for k in range(dim):
                    s += X[i, k] * Y[j, k]
                out[i, j] = (offset + s) ** degree
            else:
                s = 0.0
                for k in range(dim):
                    d = X[i, k] - Y[j, k]
                    s += d * d
                if s < DIST_FLOOR:
                    s = 0.0
                if family == GAUSSIAN:
                    out[i, j] = np.exp(-s / (scale * scale))
                else:
                    out[i, j] = np.exp(-np.sqrt(s) / scale)
    return out


_kernel_matrix_jit = _jit(_kernel_matrix_loops)


def kernel_matrix_numba(X, Y, family, scale, degree, offset):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    return _kernel_matrix_jit(X, Y, int(family), float(scale), int(degree), float(offset))


# ------------------------------------------------------------ pendulum rollout


def _accel_numpy(links, q, qd, u, p):
    """Joint accelerations for a batch; ``q``, ``qd``, ``u`` have shape (B, links)."""
    g = p[P_G]
    if links == 1:
        m, l, b = p[P_M1], p[P_L1], p[P_B1]
        inertia = m * l * l
        return ((u[:, 0] + m * g * l * np.sin(q[:, 0]) - b * qd[:, 0]) / inertia)[:, None]
    m1, m2, l1, l2 = p[P_M1], p[P_M2], p[P_L1], p[P_L2]
    q1, q2 = q[:, 0], q[:, 1]
    w1, w2 = qd[:, 0], qd[:, 1]
    c2 = np.cos(q2)
    h = m2 * l1 * l2 * np.sin(q2)
    a11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2
    a12 = m2 * l2 * l2 + m2 * l1 * l2 * c2
    a22 = m2 * l2 * l2
    s12 = np.sin(q1 + q2)
    grav1 = -g * ((m1 + m2) * l1 * np.sin(q1) + m2 * l2 * s12)
    grav2 = -g * m2 * l2 * s12
    r1 = u[:, 0] + h * (2.0 * w1 * w2 + w2 * w2) - grav1 - p[P_B1] * w1
    r2 = u[:, 1] - h * w1 * w1 - grav2 - p[P_B2] * w2
    det = a11 * a22 - a12 * a12
    return np.stack(((a22 * r1 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det), axis=1)


def rollout_batch_numpy(U, x0, p, links):
    """Semi-implicit Euler rollouts for a batch of control sequences.

    Returns ``(states, applied, bad)``: states has shape (B, T+1, 2*links),
    ``applied`` holds the saturated torques and ``bad[b]`` is the first step
    index whose state is non-finite, or -1.
    """
    U = np.asarray(U, dtype=np.float64)
    nb, horizon = U.shape[0], U.shape[1]
    umax = p[P_UMAX]
    applied = np.clip(U, -umax, umax) if np.isfinite(umax) else U.copy()
    states = np.empty((nb, horizon + 1, 2 * links))
    states[:, 0, :] = x0
    q = np.repeat(np.asarray(x0[:links], dtype=np.float64)[None, :], nb, axis=0)
    qd = np.repeat(np.asarray(x0[links:], dtype=np.float64)[None, :], nb, axis=0)
    dt = p[P_DT]
    bad = np.full(nb, -1, dtype=np.int64)
    with np.errstate(all="ignore"):
        for t in range(horizon):
            qd = qd + dt * _accel_numpy(links, q, qd, applied[:, t, :], p)
            q = q + dt * qd
            states[:, t + 1, :links] = q
            states[:, t + 1, links:] = qd
            fresh = (bad < 0) & ~np.isfinite(states[:, t + 1, :]).all(axis=1)
            bad[fresh] = t + 1
    return states, applied, bad


def _rollout_loops(U, x0, p, links):
    nb, horizon = U.shape[0], U.shape[1]
    umax = p[P_UMAX]
    dt, g = p[P_DT], p[P_G]
    m1, m2, l1, l2, b1, b2 = p[P_M1], p[P_M2], p[P_L1], p[P_L2], p[P_B1], p[P_B2]
    states = np.empty((nb, horizon + 1, 2 * links))
    applied = np.empty_like(U)
    bad = np.full(nb, -1, dtype=np.int64)
    for b in range(nb):
        for k in range(2 * links):
            states[b, 0, k] = x0[k]
        for t in range(horizon):
            for k in range(links):
                v = U[b, t, k]
                if v > umax:
                    v = umax
                elif v < -umax:
                    v = -umax
                applied[b, t, k] = v
            if links == 1:
                q, w = states[b, t, 0], states[b, t, 1]
                inertia = m1 * l1 * l1
                acc = (applied[b, t, 0] + m1 * g * l1 * np.sin(q) - b1 * w) / inertia
                w = w + dt * acc
                states[b, t + 1, 0] = q + dt * w
                states[b, t + 1, 1] = w
            else:
                q1, q2 = states[b, t, 0], states[b, t, 1]
                w1, w2 = states[b, t, 2], states[b, t, 3]
                c2 = np.cos(q2)
                h = m2 * l1 * l2 * np.sin(q2)
                a11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2
                a12 = m2 * l2 * l2 + m2 * l1 * l2 * c2
                a22 = m2 * l2 * l2
                s12 = np.sin(q1 + q2)
                grav1 = -g * ((m1 + m2) * l1 * np.sin(q1) + m2 * l2 * s12)
                grav2 = -g * m2 * l2 * s12
                r1 = applied[b, t, 0] + h * (2.0 * w1 * w2 + w2 * w2) - grav1 - b1 * w1
                r2 = applied[b, t, 1] - h * w1 * w1 - grav2 - b2 * w2
                det = a11 * a22 - a12 * a12
                w1 = w1 + dt * ((a22 * r1 - a12 * r2) / det)
                w2 = w2 + dt * ((a11 * r2 - a12 * r1) / det)
                states[b, t + 1, 0] = q1 + dt * w1
                states[b, t + 1, 1] = q2 + dt * w2
                states[b, t + 1, 2] = w1
                states[b, t + 1, 3] = w2
            if bad[b] < 0:
                for k in range(2 * links):
                    if not np.isfinite(states[b, t + 1, k]):
                        bad[b] = t + 1
                        break
    return states, applied, bad


_rollout_jit = _jit(_rollout_loops)


def rollout_batch_numba(U, x0, p, links):
    U = np.ascontiguousarray(U, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    return _rollout_jit(U, x0, p, int(links))


if USE_NUMBA:
    kernel_matrix = kernel_matrix_numba
    rollout_batch = rollout_batch_numba
else:
    kernel_matrix = kernel_matrix_numpy
    rollout_batch = rollout_batch_numpy
