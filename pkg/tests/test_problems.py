import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ksos.core import BoxDomain, ObjectiveOracle
from ksos.errors import InvalidArgumentError
from ksos.kernels import gaussian
from ksos.problems import (
    WEIGHT_FLOOR,
    RangeOnlyInstance,
    best_sample_baseline,
    generate_ro_instance,
    grid_points,
    local_refine,
    quadratic,
    quartic_double_well,
    ro_cost_nonsq,
    ro_cost_sq,
    ro_oracle,
    two_basin,
)
from ksos.restarts import RestartSchedule, optimize


def loop_cost(inst, x, squared):
    total = 0.0
    for a, d, w in zip(inst.anchors, inst.distances, inst.weights):
        r = np.sqrt((x[0] - a[0]) ** 2 + (x[1] - a[1]) ** 2)
        res = d * d - r * r if squared else d - r
        total += res * res / w
    return total


def test_instance_defaults():
    inst = generate_ro_instance(3)
    assert inst.anchors.shape == (5, 2)
    np.testing.assert_allclose(inst.anchors.max(0) - inst.anchors.min(0), [2.0, 2.0], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(inst.weights, WEIGHT_FLOOR)
    assert np.all(np.abs(inst.ground_truth) <= 1.0)


def test_instance_noiseless_zero_cost():
    inst = generate_ro_instance(11, noise_std=0.0)
    assert ro_cost_nonsq(inst, inst.ground_truth) == pytest.approx(0.0, abs=1e-18)
    assert ro_cost_sq(inst, inst.ground_truth) == pytest.approx(0.0, abs=1e-18)


def test_instance_validation():
    with pytest.raises(InvalidArgumentError):
        generate_ro_instance(0, anchor_count=2)
    with pytest.raises(InvalidArgumentError):
        generate_ro_instance(0, noise_std=-0.1)
    with pytest.raises(InvalidArgumentError):
        RangeOnlyInstance(np.zeros((3, 2)), np.ones(3), np.zeros(3), np.zeros(2))


def test_noisy_instance_properties():
    inst = generate_ro_instance(5, noise_std=0.5)
    assert np.all(inst.distances >= 0)
    np.testing.assert_array_equal(inst.weights, 0.25)
    assert generate_ro_instance(5, noise_std=0.5).to_json() == inst.to_json()
    assert generate_ro_instance(6, noise_std=0.5).to_json() != inst.to_json()


def test_json_round_trip():
    inst = generate_ro_instance(2, noise_std=0.1)
    back = RangeOnlyInstance.from_json(inst.to_json())
    for name in ("anchors", "distances", "weights", "ground_truth"):
        np.testing.assert_array_equal(getattr(back, name), getattr(inst, name))
    assert back.seed == 2 and back.noise_std == 0.1


def test_single_anchor_costs():
    inst = RangeOnlyInstance([[0.0, 0.0]], [1.0], [1.0], [1.0, 0.0])
    assert ro_cost_nonsq(inst, np.array([2.0, 0.0])) == 1.0
    assert ro_cost_sq(inst, np.array([2.0, 0.0])) == 9.0


@given(st.integers(0, 10**6), st.floats(0, 0.3), st.floats(-2, 2), st.floats(-2, 2))
def test_costs_match_loop_and_relabeling(seed, noise, x0, x1):
    inst = generate_ro_instance(seed, noise_std=noise)
    x = np.array([x0, x1])
    assert ro_cost_nonsq(inst, x) == pytest.approx(loop_cost(inst, x, False), rel=1e-12, abs=1e-12)
    assert ro_cost_sq(inst, x) == pytest.approx(loop_cost(inst, x, True), rel=1e-12, abs=1e-12)
    perm = np.random.default_rng(seed).permutation(5)
    shuffled = RangeOnlyInstance(inst.anchors[perm], inst.distances[perm], inst.weights[perm],
                                 inst.ground_truth)
    assert ro_cost_nonsq(shuffled, x) == pytest.approx(ro_cost_nonsq(inst, x), rel=1e-12, abs=1e-15)
    assert ro_cost_sq(shuffled, x) == pytest.approx(ro_cost_sq(inst, x), rel=1e-12, abs=1e-15)


@given(st.integers(0, 10**6), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_noiseless_zero_sets_coincide(seed, x0, x1):
    inst = generate_ro_instance(seed)
    x = np.array([x0, x1])
    assert (ro_cost_nonsq(inst, x) < 1e-20) == (ro_cost_sq(inst, x) < 1e-20)
    assert ro_cost_nonsq(inst, x) >= 0 and ro_cost_sq(inst, x) >= 0


def test_costs_vectorized():
    inst = generate_ro_instance(1, noise_std=0.1)
    X = np.random.default_rng(0).uniform(-1, 1, size=(4, 3, 2))
    out = ro_cost_sq(inst, X)
    assert out.shape == (4, 3)
    assert out[2, 1] == pytest.approx(ro_cost_sq(inst, X[2, 1]))
    o = ro_oracle(inst)
    np.testing.assert_allclose(o.evaluate_many(X.reshape(-1, 2)),
                               [o(x) for x in X.reshape(-1, 2)], rtol=1e-15)


def test_analytic_functions():
    assert two_basin([0.6]) == 0.0
    assert two_basin([-0.5]) == pytest.approx(0.05)
    assert quartic_double_well([1.0]) == quartic_double_well([-1.0]) == 0.0
    assert quadratic([1.0, 2.0])([1.0, 2.0]) == 0.0


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_local_refine_quadratic_bowl(a, b):
    res = local_refine(quadratic([0.25, -0.5]), [a, b], tolerance=1e-9)
    assert res.converged
    np.testing.assert_allclose(res.point, [0.25, -0.5], atol=1e-6)


def test_local_refine_from_noiseless_truth():
    inst = generate_ro_instance(4)
    res = local_refine(ro_oracle(inst), inst.ground_truth, tolerance=1e-9)
    assert np.linalg.norm(res.point - inst.ground_truth) <= 1e-6


def test_local_refine_noisy_descends():
    inst = generate_ro_instance(4, noise_std=0.1)
    o = ro_oracle(inst)
    res = local_refine(o, inst.ground_truth, tolerance=1e-9)
    assert res.value <= o(inst.ground_truth)


def test_local_refine_iteration_cap():
    res = local_refine(quadratic(100.0), [0.0], tolerance=1e-12, initial_step=1e-3, max_iters=50)
    assert not res.converged
    assert res.iterations == 50
    assert res.value < quadratic(100.0)([0.0])


def test_grid_points():
    pts = grid_points(BoxDomain([0.0, 0.0], 1.0), 25)
    assert pts.shape == (25, 2)
    assert {tuple(p) for p in pts} == set(itertools.product(np.linspace(-1, 1, 5), repeat=2))
    assert grid_points(BoxDomain([0.0, 0.0], 1.0), 26).shape == (36, 2)
    np.testing.assert_array_equal(grid_points(BoxDomain([0.5], 1.0), 1), [[0.5]])


def test_best_sample_baseline():
    o = ObjectiveOracle(quadratic([0.0, 0.0]), 2)
    x, v = best_sample_baseline(o, BoxDomain([0.0, 0.0], 1.0), 25, grid=True)
    np.testing.assert_array_equal(x, [0.0, 0.0])
    assert v == 0.0
    x1, v1 = best_sample_baseline(o, BoxDomain([0.0, 0.0], 1.0), 1, seed=3)
    assert v1 == quadratic([0.0, 0.0])(x1)
    with pytest.raises(InvalidArgumentError):
        best_sample_baseline(o, BoxDomain([0.0, 0.0], 1.0), 0)


def test_best_sample_above_global_minimum():
    inst = generate_ro_instance(9, noise_std=0.1)
    o = ro_oracle(inst)
    _, v = best_sample_baseline(o, BoxDomain([0.0, 0.0], 1.0), 74, seed=9)
    g = np.linspace(-1.5, 1.5, 601)
    G = np.stack(np.meshgrid(g, g), axis=-1)
    dense_min = local_refine(o, G.reshape(-1, 2)[np.argmin(ro_cost_nonsq(inst, G))], 1e-10).value
    assert v >= dense_min


def test_kernelsos_beats_best_sample_noiseless():
    # median over 10 seeds at matched budget (w + 1)(N + 1)
    ks, bs = [], []
    for seed in range(10):
        inst = generate_ro_instance(seed)
        sched = RestartSchedule([0.0, 0.0], 1.0, 1, 0.5, 36, 1.0, 1e-3)
        scale = WEIGHT_FLOOR
        o = ObjectiveOracle(lambda x: float(ro_cost_nonsq(inst, x)) * scale, 2)
        ks.append(optimize(o, "gaussian", sched, seed=seed).best_value / scale)
        bs.append(best_sample_baseline(ro_oracle(inst), BoxDomain([0.0, 0.0], 1.0), sched.budget,
                                       seed=seed)[1])
    assert np.median(bs) > np.median(ks)
    assert gaussian(1.0).scale == 1.0
