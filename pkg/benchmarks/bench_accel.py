"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_accel.py [--repeat 5]

Both paths are called through their explicit names, so the ``KSOS_NUMBA``
flag does not matter here. The first numba call (compilation or cache load)
is excluded from the timings.
"""
import argparse
import timeit

import numpy as np

from ksos import _accel
from ksos.trajopt import RolloutProblem, double_pendulum, single_pendulum


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_gram(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, dim in [(100, 2), (200, 50), (400, 100)]:
        X = rng.uniform(-1, 1, size=(n, dim))
        for name, fam in [("gaussian", _accel.GAUSSIAN), ("laplace", _accel.LAPLACE)]:
            args = (X, X, fam, 1.0, 2, 1.0)
            _accel.kernel_matrix_numba(*args)
            t_np = _best(lambda: _accel.kernel_matrix_numpy(*args), repeat, 3)
            t_nb = _best(lambda: _accel.kernel_matrix_numba(*args), repeat, 3)
            err = np.max(np.abs(_accel.kernel_matrix_numpy(*args) - _accel.kernel_matrix_numba(*args)))
            rows.append((f"gram {name} N={n} d={dim}", t_np, t_nb, err))
    return rows


def bench_rollout(repeat):
    rng = np.random.default_rng(1)
    rows = []
    for label, params in [("single", single_pendulum()), ("double", double_pendulum())]:
        prob = RolloutProblem(params)
        for batch in (1, 100):
            U = rng.uniform(-2, 2, size=(batch, params.horizon, params.links))
            args = (U, prob.start_state, params.packed(), params.links)
            _accel.rollout_batch_numba(*args)
            t_np = _best(lambda: _accel.rollout_batch_numpy(*args), repeat, 5)
            t_nb = _best(lambda: _accel.rollout_batch_numba(*args), repeat, 5)
            err = np.max(np.abs(_accel.rollout_batch_numpy(*args)[0] - _accel.rollout_batch_numba(*args)[0]))
            rows.append((f"rollout {label} batch={batch} T={params.horizon}", t_np, t_nb, err))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rows = bench_gram(args.repeat) + bench_rollout(args.repeat)
    print(f"{'case':40s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for name, t_np, t_nb, err in rows:
        print(f"{name:40s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.1f} {err:9.1e}")


if __name__ == "__main__":
    main()
