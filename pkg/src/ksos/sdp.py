"""Kernel SOS semidefinite program.

Primal: maximize ``c - lam * tr(B)`` over ``B >= 0`` subject to
``f_i - c = phi_i^T B phi_i`` where ``phi_i`` are the columns of ``R``.

Dual: minimize ``sum_i alpha_i f_i`` subject to ``sum_i alpha_i = 1`` and
``M(alpha) = lam * I + R diag(alpha) R^T >= 0``.

:func:`solve_dual_newton` runs a damped Newton barrier method on the N dual
weights. :func:`reference_dense_solve` is an independent primal-dual
path-following method over the full ``(c, B)`` variables, only meant for small
test instances.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateRegularizationError,
    InvalidArgumentError,
    ProblemSizeError,
    SolverFailureError,
)


@dataclass(frozen=True)
class SosProblem:
    features: np.ndarray
    values: np.ndarray
    lam: float

    def __post_init__(self):
        R = np.asarray(self.features, dtype=np.float64)
        f = np.asarray(self.values, dtype=np.float64).ravel()
        if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[1] != f.size:
            raise InvalidArgumentError(f"features {R.shape} do not match {f.size} values")
        if not np.all(np.isfinite(f)):
            raise InvalidArgumentError("values must be finite")
        if not self.lam >= 0:
            raise InvalidArgumentError("lambda must be nonnegative")
        object.__setattr__(self, "features", R)
        object.__setattr__(self, "values", f)

    @property
    def size(self):
        return self.values.size


@dataclass(frozen=True)
class SolverOptions:
    epsilon: float = 1e-3
    max_newton_steps: int = 100
    feasibility_tol: float = 1e-6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidArgumentError("epsilon must be positive")
        if self.max_newton_steps < 1:
            raise InvalidArgumentError("max_newton_steps must be positive")


@dataclass
class SosCertificate:
    c_lb: float
    alpha: np.ndarray
    B_factor: np.ndarray
    dual_objective: float
    diagnostics: dict = field(default_factory=dict)


def _moment_matrix(R, alpha, lam):
    M = (R * alpha) @ R.T
    M = 0.5 * (M + M.T)
    M[np.diag_indices_from(M)] += lam
    return M


def _finish(R, f, alpha, lam, eps, diagnostics):
    """Recover ``B = eps * M^{-1}`` and the lower bound from dual weights."""
    M = _moment_matrix(R, alpha, lam)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        if lam == 0:
            raise DegenerateRegularizationError(
                "moment matrix is singular with lambda = 0; use lambda > 0") from exc
        raise SolverFailureError("moment matrix lost positive definiteness", diagnostics) from exc
    Linv = linalg.solve_triangular(L, np.eye(len(f)), lower=True)
    B = eps * (Linv.T @ Linv)
    B = 0.5 * (B + B.T)
    quad = np.einsum("ji,jk,ki->i", R, B, R)
    c_lb = float(np.min(f - quad))
    diagnostics = dict(diagnostics)
    diagnostics["min_eig_M"] = float(np.linalg.eigvalsh(M)[0])
    diagnostics["trace_B"] = float(np.trace(B))
    return SosCertificate(c_lb, alpha, B, float(alpha @ f), diagnostics)


def _epsilon_schedule(f, eps):
    spread = float(np.max(f) - np.min(f))
    eps0 = max(1.0, spread) * 0.1
    stages = []
    while eps0 > eps * (1 + 1e-12):
        stages.append(eps0)
        eps0 /= 10.0
    stages.append(eps)
    return stages


def _newton_direction(H, g):
    """Solve ``[H 1; 1^T 0] [d; nu] = [-g; 0]``."""
    n = len(g)
    ones = np.ones(n)
    try:
        cf = linalg.cho_factor(H, lower=True, check_finite=False)
        hg = linalg.cho_solve(cf, g, check_finite=False)
        h1 = linalg.cho_solve(cf, ones, check_finite=False)
        nu = -(ones @ hg) / (ones @ h1)
        d = -(hg + nu * h1)
    except linalg.LinAlgError:
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = H
        kkt[:n, n] = kkt[n, :n] = 1.0
        rhs = np.concatenate([-g, [0.0]])
        d = linalg.lstsq(kkt, rhs, check_finite=False)[0][:n]
    if not np.all(np.isfinite(d)):
        raise SolverFailureError("non-finite Newton direction")
    return d - d.mean()


def _cholesky_or_none(M):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def _renormalize(alpha):
    """Restore ``sum(alpha) = 1``, correcting the entry where rounding costs least."""
    alpha = alpha + (1.0 - math.fsum(alpha)) / len(alpha)
    j = int(np.argmin(np.abs(alpha)))
    alpha[j] += 1.0 - math.fsum(alpha)
    return alpha


def _feasible_step(R, lam, alpha, step, diagnostics, max_halvings=60):
    """Take ``step`` from ``alpha``, halving it while ``M`` fails to factor.

    The damped step stays inside the cone in exact arithmetic; near the
    boundary of an ill-conditioned cone rounding can push it out. Returns
    ``None`` when no halving helps: ``alpha`` then sits on the cone's edge to
    machine precision and cannot be improved.
    """
    for halvings in range(max_halvings):
        trial = _renormalize(alpha + step)
        L = _cholesky_or_none(_moment_matrix(R, trial, lam))
        if L is not None:
            return trial, L, halvings
        step = 0.5 * step
        diagnostics["feasibility_backtracks"] = diagnostics.get("feasibility_backtracks", 0) + 1
    return None


def solve_dual_newton(problem, opts=None):
    """Damped Newton barrier method on the dual weights.

    Each stage minimizes ``alpha @ f - eps * logdet(M(alpha))`` on the simplex
    slice ``sum(alpha) = 1``; ``eps`` shrinks tenfold per stage down to
    ``opts.epsilon`` and the Newton budget is shared across stages, unused
    steps rolling over.
    """
    opts = opts or SolverOptions()
    R, f, lam = problem.features, problem.values, float(problem.lam)
    n = problem.size
    alpha = np.full(n, 1.0 / n)
    diagnostics = {"newton_steps_used": 0, "final_decrement": 0.0, "stage_objectives": [],
                   "lambda_zero": lam == 0}
    if n == 1 or np.ptp(f) == 0:
        return _finish(R, f, alpha, lam, opts.epsilon, diagnostics)

    stages = _epsilon_schedule(f, opts.epsilon)
    budget = opts.max_newton_steps
    used = 0
    decrement = np.inf
    L = _cholesky_or_none(_moment_matrix(R, alpha, lam))
    if L is None:
        if lam == 0:
            raise DegenerateRegularizationError(
                "moment matrix is singular with lambda = 0; use lambda > 0")
        raise SolverFailureError("initial moment matrix is not positive definite", diagnostics)
    for k, eps in enumerate(stages):
        stage_budget = (budget - used) // (len(stages) - k)
        if k == len(stages) - 1:
            stage_budget = budget - used
        rising = 0
        shortened = False
        prev_dec = prev_phi = np.inf
        for _ in range(stage_budget):
            W = linalg.solve_triangular(L, R, lower=True, check_finite=False)
            phi = float(alpha @ f) - 2.0 * eps * float(np.sum(np.log(np.diag(L))))
            P = W.T @ W
            g = f - eps * np.diag(P)
            H = eps * P * P
            d = _newton_direction(H, g)
            # decrement of the self-concordant function (objective / eps)
            decrement = float(np.sqrt(max(d @ H @ d, 0.0) / eps))
            used += 1
            if decrement < 1e-7:
                break
            # Far from the central path the decrement may grow while damped steps
            # still lower the barrier objective; only a stall of both counts.
            stalled = decrement > prev_dec and phi >= prev_phi - 1e-12 * max(1.0, abs(prev_phi))
            if stalled and decrement < 0.25:
                # inside the quadratic-convergence region: roundoff floor reached
                break
            if stalled and shortened:
                diagnostics["boundary_stall"] = True
                break
            rising = rising + 1 if stalled else 0
            if rising >= 5:
                diagnostics.update(newton_steps_used=used, final_decrement=decrement)
                raise SolverFailureError("Newton decrement rose for 5 steps with no barrier decrease", diagnostics)
            prev_dec, prev_phi = decrement, phi
            moved = _feasible_step(R, lam, alpha, d / (1.0 + decrement), diagnostics)
            if moved is None:
                diagnostics["boundary_stall"] = True
                break
            alpha, L, halvings = moved
            shortened = halvings > 0
        diagnostics["stage_objectives"].append(float(alpha @ f))
        if diagnostics.get("boundary_stall"):
            break
    diagnostics.update(newton_steps_used=used, final_decrement=decrement, epsilon_stages=stages)
    return _finish(R, f, alpha, lam, opts.epsilon, diagnostics)


# ------------------------------------------------------------ dense reference


def _max_step(X, dX, frac=0.95):
    """Largest ``t <= 1`` (times ``frac``) keeping ``X + t dX`` positive definite."""
    w, V = np.linalg.eigh(X)
    w = np.maximum(w, np.finfo(float).tiny)
    Wi = V / np.sqrt(w)
    lo = np.linalg.eigvalsh(Wi.T @ dX @ Wi)[0]
    t = 1.0 if lo >= -1.0 else -frac / lo
    for _ in range(60):
        try:
            np.linalg.cholesky(X + t * dX)
            return t
        except np.linalg.LinAlgError:
            t *= 0.5
    return 0.0


def reference_dense_solve(problem, tol=1e-10, max_iters=200, max_size=30):
    """Primal-dual path following on the full SDP, for small test instances.

    Iterates on the primal pair ``(c, B)`` and the dual pair ``(alpha, Z)``
    with ``Z = lam * I + R diag(alpha) R^T`` using the HKM search direction,
    until the duality gap ``tr(B Z)`` and both residuals fall below ``tol``.
    """
    R, f, lam = problem.features, problem.values, float(problem.lam)
    n = problem.size
    if n > max_size:
        raise ProblemSizeError(f"reference solver is limited to N <= {max_size}, got {n}")
    scale = max(1.0, float(np.max(np.abs(f))))
    B = np.eye(n)
    c = 0.0
    alpha = np.full(n, 1.0 / n)
    Z = _moment_matrix(R, alpha, lam)
    try:
        np.linalg.cholesky(Z)
    except np.linalg.LinAlgError as exc:
        raise DegenerateRegularizationError("initial dual slack is singular; use lambda > 0") from exc
    ones = np.ones(n)
    it = 0
    for it in range(1, max_iters + 1):
        Zi = np.linalg.inv(Z)
        Zi = 0.5 * (Zi + Zi.T)
        PB = R.T @ B @ R
        PZ = R.T @ Zi @ R
        r_p = f - c - np.diag(PB)
        r_d = 1.0 - alpha.sum()
        gap = float(np.sum(B * Z))
        if gap < tol * scale and np.max(np.abs(r_p)) < tol * scale and abs(r_d) < tol:
            break
        mu = 0.1 * gap / n
        S = PB * PZ
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = -S
        kkt[:n, n] = 1.0
        kkt[n, :n] = 1.0
        rhs = np.concatenate([r_p - mu * np.diag(PZ) + np.diag(PB), [r_d]])
        sol = linalg.lstsq(kkt, rhs, check_finite=False)[0]
        d_alpha, d_c = sol[:n], sol[n]
        dZ = (R * d_alpha) @ R.T
        dZ = 0.5 * (dZ + dZ.T)
        T = B @ dZ @ Zi
        dB = mu * Zi - B - 0.5 * (T + T.T)
        dB = 0.5 * (dB + dB.T)
        tp = _max_step(B, dB)
        td = _max_step(Z, dZ)
        B = B + tp * dB
        B = 0.5 * (B + B.T)
        c += tp * d_c
        alpha = alpha + td * d_alpha
        Z = _moment_matrix(R, alpha, lam)
    quad = np.einsum("ji,jk,ki->i", R, B, R)
    c_lb = float(min(np.min(f - quad), c))
    diagnostics = {
        "iterations": it,
        "duality_gap": float(np.sum(B * Z)),
        "primal_residual": float(np.max(np.abs(f - c - quad))),
        "min_eig_M": float(np.linalg.eigvalsh(Z)[0]),
        "trace_B": float(np.trace(B)),
    }
    return SosCertificate(c_lb, alpha, B, float(alpha @ f), diagnostics)
