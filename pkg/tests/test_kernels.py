import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ksos.errors import InvalidArgumentError, SingularKernelError
from ksos.kernels import (
    JitterPolicy,
    KernelSpec,
    cross_kernel,
    eval_kernel,
    factorize,
    gaussian,
    gram_matrix,
    laplace,
    polynomial,
)

coords = st.floats(-5, 5, allow_nan=False, width=64)
specs = st.one_of(
    st.builds(gaussian, st.floats(0.05, 10)),
    st.builds(laplace, st.floats(0.05, 10)),
    st.builds(polynomial, st.integers(1, 4), st.floats(0, 2)),
)


def test_kernel_parameter_validation():
    with pytest.raises(InvalidArgumentError):
        KernelSpec("matern")
    with pytest.raises(InvalidArgumentError):
        gaussian(0.0)
    with pytest.raises(InvalidArgumentError):
        laplace(-1.0)
    with pytest.raises(InvalidArgumentError):
        KernelSpec("polynomial", degree=0)
    with pytest.raises(InvalidArgumentError):
        KernelSpec("polynomial", degree=2, offset=-1)


def test_polynomial_ignores_scale_updates():
    k = polynomial(3)
    assert k.with_scale(0.1) is k
    assert gaussian(1.0).with_scale(0.5).scale == 0.5


@pytest.mark.parametrize("spec, x, y, expected", [
    (gaussian(1.3), [0.2, -0.7], [0.2, -0.7], 1.0),
    (gaussian(2.0), [0.0, 0.0], [2.0, 0.0], np.exp(-1.0)),
    (laplace(0.5), [1.0], [0.0], np.exp(-2.0)),
    (polynomial(2, 1.0), [1.0, 0.0], [1.0, 0.0], 4.0),
])
def test_eval_kernel_values(spec, x, y, expected):
    assert eval_kernel(spec, x, y) == pytest.approx(expected, rel=1e-12)


def test_eval_kernel_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        eval_kernel(gaussian(1), [0.0, 1.0], [0.0])
    with pytest.raises(InvalidArgumentError):
        cross_kernel(gaussian(1), np.zeros((2, 3)), np.zeros((2, 2)))


@given(specs, arrays(np.float64, 3, elements=coords), arrays(np.float64, 3, elements=coords))
def test_eval_kernel_symmetric(spec, x, y):
    assert eval_kernel(spec, x, y) == eval_kernel(spec, y, x)


@given(st.sampled_from(["gaussian", "laplace"]), st.floats(0.05, 10),
       arrays(np.float64, 2, elements=coords), arrays(np.float64, 2, elements=coords))
def test_radial_values_in_unit_interval(family, scale, x, y):
    v = eval_kernel(KernelSpec(family, scale), x, y)
    assert 0.0 <= v <= 1.0


def test_gram_duplicate_points():
    K = gram_matrix(gaussian(1.0), [[0.3, 0.1], [0.3, 0.1]])
    np.testing.assert_array_equal(K, np.ones((2, 2)))


def test_gram_two_scalars():
    K = gram_matrix(gaussian(1.0), np.array([0.0, 1.0]))
    e = np.exp(-1.0)
    np.testing.assert_allclose(K, [[1, e], [e, 1]], rtol=1e-14)


def test_gram_empty_rejected():
    with pytest.raises(InvalidArgumentError):
        gram_matrix(gaussian(1.0), np.zeros((0, 2)))


def test_laplace_gram_psd(rng):
    K = gram_matrix(laplace(1.0), rng.uniform(-1, 1, size=(10, 2)))
    assert np.linalg.eigvalsh(K)[0] >= -1e-10


@given(specs, st.integers(1, 25), st.integers(0, 2**31 - 1))
def test_gram_symmetric_psd_unit_diagonal(spec, n, seed):
    X = np.random.default_rng(seed).uniform(-1, 1, size=(n, 2))
    K = gram_matrix(spec, X)
    np.testing.assert_array_equal(K, K.T)
    diag = np.array([eval_kernel(spec, x, x) for x in X])
    np.testing.assert_allclose(np.diag(K), diag, rtol=1e-14)
    if spec.family != "polynomial":
        np.testing.assert_array_equal(np.diag(K), 1.0)
    # relative to the largest entry, which for polynomial kernels can be large
    assert np.linalg.eigvalsh(K)[0] >= -1e-10 * max(1.0, np.abs(K).max())


@given(st.integers(1, 4), st.floats(0, 2), arrays(np.float64, 6, elements=coords))
def test_polynomial_matches_expansion(d, c, xs):
    from math import comb

    K = gram_matrix(polynomial(d, c), xs)
    expand = sum(comb(d, j) * c ** (d - j) * np.outer(xs, xs) ** j for j in range(d + 1))
    np.testing.assert_allclose(K, expand, rtol=1e-10, atol=1e-10)


def test_factorize_identity():
    f = factorize(np.eye(2))
    np.testing.assert_array_equal(f.R, np.eye(2))
    assert f.jitter_used == 0.0
    assert f.sample_count == 2


def test_factorize_rank_one_uses_first_rung():
    K = np.ones((2, 2))
    f = factorize(K)
    assert f.jitter_used == JitterPolicy().initial
    np.testing.assert_allclose(f.R.T @ f.R, K + f.jitter_used * np.eye(2), atol=1e-12)


def test_factorize_36_points(rng):
    K = gram_matrix(gaussian(1.4), rng.uniform(-1, 1, size=(36, 2)))
    f = factorize(K)
    recon = f.R.T @ f.R - K - f.jitter_used * np.eye(36)
    assert np.max(np.abs(recon)) < 1e-8
    np.testing.assert_array_equal(f.R, np.triu(f.R))


def test_factorize_failure_carries_jitter():
    K = -np.eye(3)
    policy = JitterPolicy(initial=1e-10, growth=10, max_tries=3)
    with pytest.raises(SingularKernelError) as info:
        factorize(K, policy)
    assert info.value.jitter == pytest.approx(1e-8)


def test_factorize_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        factorize(np.ones((2, 3)))
    with pytest.raises(InvalidArgumentError):
        factorize(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_jitter_ladder():
    assert JitterPolicy(1e-6, 100, 3).ladder() == pytest.approx([0.0, 1e-6, 1e-4, 1e-2])


@given(st.integers(2, 30), st.floats(0.1, 3), st.integers(0, 2**31 - 1))
def test_factorize_reconstruction_and_idempotence(n, scale, seed):
    X = np.random.default_rng(seed).uniform(-1, 1, size=(n, 2))
    K = gram_matrix(gaussian(scale), X)
    f = factorize(K)
    assert np.max(np.abs(f.R.T @ f.R - K - f.jitter_used * np.eye(n))) < 1e-8
    again = factorize(f.R.T @ f.R - f.jitter_used * np.eye(n))
    ladder = JitterPolicy().ladder()
    assert abs(ladder.index(again.jitter_used) - ladder.index(f.jitter_used)) <= 1


def test_features_of_samples_are_columns(rng):
    X = rng.uniform(-1, 1, size=(8, 2))
    spec = gaussian(0.7)
    f = factorize(gram_matrix(spec, X))
    phi = f.features(cross_kernel(spec, X, X))
    np.testing.assert_allclose(phi, f.R, atol=1e-8)
