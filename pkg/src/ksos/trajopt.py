"""Pendulum simulator, single-shooting cost and a finite-difference refiner.

Angles are measured from the upright position, so the goal state is the
origin. The double pendulum uses the absolute angle of the first link and
the relative angle of the second; masses sit at the link tips.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .core import ObjectiveOracle
from .errors import DivergedRolloutError, InvalidArgumentError


@dataclass(frozen=True)
class PendulumParams:
    links: int = 1
    masses: tuple = (1.0,)
    lengths: tuple = (1.0,)
    gravity: float = 9.81
    damping: tuple = (0.0,)
    dt: float = 0.05
    horizon: int = 50
    torque_limit: float = None

    def __post_init__(self):
        if self.links not in (1, 2):
            raise InvalidArgumentError("only 1- and 2-link pendulums are supported")
        for name in ("masses", "lengths", "damping"):
            vals = tuple(float(v) for v in np.broadcast_to(getattr(self, name), (self.links,)))
            object.__setattr__(self, name, vals)
        if min(self.masses) <= 0 or min(self.lengths) <= 0:
            raise InvalidArgumentError("masses and lengths must be positive")
        if not self.dt > 0 or self.horizon < 1:
            raise InvalidArgumentError("need dt > 0 and horizon >= 1")
        if self.torque_limit is not None and not self.torque_limit > 0:
            raise InvalidArgumentError("torque limit must be positive")

    @property
    def control_dim(self):
        return self.horizon * self.links

    def packed(self):
        m = self.masses + (0.0,) * (2 - self.links)
        l = self.lengths + (0.0,) * (2 - self.links)
        b = self.damping + (0.0,) * (2 - self.links)
        umax = np.inf if self.torque_limit is None else self.torque_limit
        return np.array([m[0], m[1], l[0], l[1], b[0], b[1], self.gravity, self.dt, umax])


def single_pendulum(**kw):
    defaults = dict(links=1, masses=(1.0,), lengths=(1.0,), damping=(0.05,), dt=0.05,
                    horizon=50, torque_limit=2.0)
    return PendulumParams(**{**defaults, **kw})


def double_pendulum(**kw):
    defaults = dict(links=2, masses=(1.0, 1.0), lengths=(0.5, 0.5), damping=(0.05, 0.05),
                    dt=0.05, horizon=50, torque_limit=3.0)
    return PendulumParams(**{**defaults, **kw})


def hanging_state(links):
    x = np.zeros(2 * links)
    x[0] = np.pi
    return x


@dataclass(frozen=True)
class RolloutProblem:
    params: PendulumParams
    start_state: np.ndarray = None
    control_cost_weight: float = 1e-3

    def __post_init__(self):
        x0 = hanging_state(self.params.links) if self.start_state is None else self.start_state
        x0 = np.asarray(x0, dtype=np.float64).copy()
        if x0.shape != (2 * self.params.links,):
            raise InvalidArgumentError("start state must hold angles then velocities")
        if self.control_cost_weight < 0:
            raise InvalidArgumentError("control cost weight must be nonnegative")
        object.__setattr__(self, "start_state", x0)

    @property
    def dimension(self):
        return self.params.control_dim


def _controls(problem, U):
    p = problem.params
    U = np.asarray(U, dtype=np.float64)
    if U.shape[-1] != p.control_dim:
        raise InvalidArgumentError(f"control sequence needs {p.control_dim} entries, got {U.shape[-1]}")
    return U.reshape(-1, p.horizon, p.links)


def rollout_batch(problem, U):
    """Trajectories for a batch of flat control sequences, shape (B, T+1, 2*links).

    Torques beyond the limit are saturated. Also returns the applied torques.
    """
    p = problem.params
    states, applied, bad = _accel.rollout_batch(_controls(problem, U), problem.start_state,
                                                p.packed(), p.links)
    if np.any(bad >= 0):
        k = int(np.flatnonzero(bad >= 0)[0])
        raise DivergedRolloutError(f"rollout {k} became non-finite at step {bad[k]}", int(bad[k]))
    return states, applied


def rollout(problem, u):
    states, _ = rollout_batch(problem, np.asarray(u, dtype=np.float64)[None, :])
    return states[0]


def to_cost_batch(problem, U):
    states, applied = rollout_batch(problem, U)
    terminal = states[:, -1, :]
    # huge unclipped controls overflow to inf, which callers treat as a rejected trial
    with np.errstate(over="ignore"):
        effort = np.sum(applied.reshape(len(applied), -1) ** 2, axis=1)
        return np.sum(terminal * terminal, axis=1) + problem.control_cost_weight * effort


def to_cost(problem, u):
    """Squared terminal-state norm plus weighted squared (applied) torques."""
    return float(to_cost_batch(problem, np.asarray(u, dtype=np.float64)[None, :])[0])


def as_oracle(problem):
    bounds = None
    lim = problem.params.torque_limit
    if lim is not None:
        bounds = (-lim, lim)
    return ObjectiveOracle(lambda u: to_cost(problem, u), problem.dimension, reentrant=True,
                           batch_fn=lambda U: to_cost_batch(problem, U), bounds=bounds)


def energy(params, state):
    """Total mechanical energy with zero potential at the pivot height."""
    n = params.links
    q, w = np.asarray(state[:n]), np.asarray(state[n:])
    g = params.gravity
    if n == 1:
        m, l = params.masses[0], params.lengths[0]
        return 0.5 * m * l * l * w[0] ** 2 + m * g * l * np.cos(q[0])
    m1, m2 = params.masses
    l1, l2 = params.lengths
    c2 = np.cos(q[1])
    a11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2 * m2 * l1 * l2 * c2
    a12 = m2 * l2 * l2 + m2 * l1 * l2 * c2
    a22 = m2 * l2 * l2
    kin = 0.5 * (a11 * w[0] ** 2 + 2 * a12 * w[0] * w[1] + a22 * w[1] ** 2)
    pot = g * ((m1 + m2) * l1 * np.cos(q[0]) + m2 * l2 * np.cos(q[0] + q[1]))
    return kin + pot


def write_trajectory_csv(problem, u, path):
    states = rollout(problem, u)
    p = problem.params
    n = p.links
    applied = np.clip(np.asarray(u).reshape(p.horizon, n), -(p.torque_limit or np.inf), p.torque_limit or np.inf)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"q{k}" for k in range(n)] + [f"qd{k}" for k in range(n)] + [f"u{k}" for k in range(n)])
        for t in range(p.horizon + 1):
            ctrl = applied[t] if t < p.horizon else [float("nan")] * n
            w.writerow([repr(t * p.dt)] + [repr(float(v)) for v in states[t]] + [repr(float(v)) for v in ctrl])
    return path


# ----------------------------------------------------------------- refiner


@dataclass
class RefineResult:
    controls: np.ndarray
    cost: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def fd_gradient(problem, u):
    """Central differences with step ``1e-5 * (1 + |u_i|)``, all 2n rollouts batched."""
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    h = 1e-5 * (1.0 + np.abs(u))
    P = np.repeat(u[None, :], 2 * n, axis=0)
    idx = np.arange(n)
    P[idx, idx] += h
    P[n + idx, idx] -= h
    c = to_cost_batch(problem, P)
    return (c[:n] - c[n:]) / (2.0 * h)


def shooting_refine(problem, u0, max_iters=500, tolerance=1e-4, armijo=1e-4, initial_step=1.0):
    """Gradient descent on the shooting cost with a halving Armijo line search.

    Every line search starts from ``initial_step``. Stops when the gradient
    infinity-norm drops below ``tolerance`` (``converged=True``), after
    ``max_iters`` steps, or when no trial step gives sufficient decrease.
    """
    u = np.asarray(u0, dtype=np.float64).copy()
    cost = to_cost(problem, u)
    history = [cost]
    it = 0
    for it in range(1, max_iters + 1):
        g = fd_gradient(problem, u)
        if not np.all(np.isfinite(g)):
            return RefineResult(u, cost, it - 1, False, history)
        if np.max(np.abs(g)) < tolerance:
            return RefineResult(u, cost, it - 1, True, history)
        gg = float(g @ g)
        t = initial_step
        accepted = False
        while t > 1e-12:
            trial = u - t * g
            try:
                c = to_cost(problem, trial)
            except DivergedRolloutError:
                c = np.inf
            if np.isfinite(c) and c <= cost - armijo * t * gg:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return RefineResult(u, cost, it, False, history)
        u, cost = trial, c
        history.append(cost)
    return RefineResult(u, cost, it, False, history)
