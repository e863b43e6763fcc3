import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from faber_relu.faber import (
    FaberExpansion,
    expansion_from_function,
    faber_coefficients,
    hat_eval,
    hat_grad,
    lambda_coefficient,
    single_term,
    tensor_hat_eval,
    tensor_hat_grad,
)
from faber_relu.index import enumerate_notched, enumerate_smolyak, grid_points


def m2(t):
    return np.maximum(0.0, 1.0 - np.abs(t - 1.0))


def surplus_1d(g, k, s):
    h = 2.0 ** (-k - 1)
    x = s * 2.0 ** -k
    return -0.5 * (g(x) - 2 * g(x + h) + g(x + 2 * h))


def test_hat_values():
    assert hat_eval(0, 0, 0.5) == 1.0
    assert hat_eval(1, 1, 0.75) == 1.0
    assert hat_eval(1, 1, 0.5) == 0.0
    assert hat_eval(-1, 0, 0.25) == 0.75
    assert hat_eval(-1, 1, 0.25) == 0.25


def test_hat_matches_m2(rng):
    x = rng.random(1000)
    for k in range(5):
        for s in range(2 ** k):
            np.testing.assert_array_equal(hat_eval(k, s, x), m2(2.0 ** (k + 1) * x - 2 * s))


def test_hat_gradient_right_derivative():
    assert hat_grad(0, 0, 0.25) == 2.0
    assert hat_grad(0, 0, 0.5) == -2.0
    assert hat_grad(0, 0, 0.0) == 2.0
    assert hat_grad(0, 0, 1.0) == 0.0
    assert hat_grad(-1, 0, 0.3) == -1.0


def test_out_of_domain():
    with pytest.raises(ValueError):
        hat_eval(0, 0, 1.5)
    with pytest.raises(ValueError):
        hat_eval(2, 4, 0.5)


def test_surplus_of_tent_product():
    f = lambda X: np.prod(X * (1 - X), axis=1)
    assert lambda_coefficient(f, (0, 0), (0, 0)) == 0.0625
    assert lambda_coefficient(f, (1, 2), (1, 3)) == pytest.approx(2.0 ** (-2 * 1 - 2 - 2 * 2 - 2), rel=1e-14)


def test_surplus_matches_axiswise_formula():
    g = lambda x: np.sin(3 * x) * x * (1 - x)
    f = lambda X: g(X[:, 0]) * g(X[:, 1])
    for k, s in [((0, 0), (0, 0)), ((2, 1), (3, 0)), ((3, 2), (5, 2))]:
        expected = surplus_1d(g, k[0], s[0]) * surplus_1d(g, k[1], s[1])
        assert lambda_coefficient(f, k, s) == pytest.approx(expected, rel=1e-12, abs=1e-18)


def test_biorthogonality():
    levels = list(enumerate_smolyak(2, 3))
    for k in [(0, 0), (1, 2), (3, 0)]:
        for s in itertools.product(*[range(2 ** ki) for ki in k]):
            f = lambda X, k=k, s=s: tensor_hat_eval(k, s, X)
            coef = faber_coefficients(f, levels)
            for kk, block in coef.items():
                target = np.zeros_like(block)
                if kk == k:
                    target[s] = 1.0
                np.testing.assert_array_equal(block, target)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 3), m=st.integers(0, 4))
def test_interpolation_at_grid(seed, d, m):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=d)
    f = lambda X: np.prod(X * (1 - X), axis=1) * np.exp(X @ a)
    S = enumerate_notched(d, 2.0, m)
    R = expansion_from_function(f, S)
    X = grid_points(S).points
    assert np.max(np.abs(R(X) - f(X))) <= 1e-12 * (1 + np.max(np.abs(f(X))))


def test_expansion_gradient_matches_finite_differences(rng):
    blocks = {k: rng.normal(size=tuple(2 ** v for v in k)) for k in enumerate_smolyak(2, 3)}
    E = FaberExpansion(2, blocks)
    X = 0.05 + 0.9 * rng.random((200, 2))
    h = 1e-7
    fd = np.stack([(E(X + h * e) - E(X - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
    np.testing.assert_allclose(E.grad(X), fd, rtol=1e-4, atol=1e-6)


def test_expansion_value_is_sum_of_terms(rng):
    blocks = {k: rng.normal(size=tuple(2 ** v for v in k)) for k in [(0, 1), (2, 0), (1, 1)]}
    E = FaberExpansion(2, blocks)
    X = rng.random((50, 2))
    ref = sum(c * tensor_hat_eval(k, s, X) for (k, s), c in E.items())
    refg = sum(c * tensor_hat_grad(k, s, X) for (k, s), c in E.items())
    np.testing.assert_allclose(E(X), ref, atol=1e-13)
    np.testing.assert_allclose(E.grad(X), refg, atol=1e-12)


def test_boundary_level_terms(rng):
    E = FaberExpansion(2, {(-1, 0): np.array([[2.0], [3.0]])})
    X = rng.random((20, 2))
    np.testing.assert_allclose(E(X), (2 * (1 - X[:, 0]) + 3 * X[:, 0]) * m2(2 * X[:, 1]))


def test_text_round_trip(rng):
    blocks = {k: rng.normal(size=tuple(2 ** v for v in k)) for k in enumerate_smolyak(2, 2)}
    E = FaberExpansion(2, blocks)
    back = FaberExpansion.from_text(E.to_text())
    for k in E.levels:
        np.testing.assert_array_equal(back.coefficients[k], E.coefficients[k])
    line = E.to_text().splitlines()[0]
    assert line.count("|") == 2


def test_single_term_reproduced_exactly(rng):
    t = single_term((0, 0), (0, 0))
    R = expansion_from_function(t, enumerate_notched(2, 2, 3))
    X = rng.random((100, 2))
    np.testing.assert_array_equal(R(X), t(X))
    assert R.n_terms == 33
