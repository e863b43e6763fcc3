import math

import numpy as np
import pytest

from faber_relu.corpus import poly_tent, sine_product
from faber_relu.faber import single_term
from faber_relu.metrics import (
    ZERO,
    QuadratureSpec,
    default_quadrature,
    lp_error,
    measure,
    mixed_holder_seminorm_lb,
    nodes,
    sup_error,
    w1p_error,
)


class Affine:
    """``g(x) = c . x`` with constant gradient."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)
        self.d = len(self.c)

    def value(self, X):
        return X @ self.c

    def grad(self, X):
        return np.broadcast_to(self.c, X.shape).copy()


def test_hat_seminorm_is_two():
    # |phi_{0,0}'| = 2 everywhere on [0, 1]
    phi = single_term((0,), (0,))
    q = QuadratureSpec("midpoint", n=64)
    for p in (1.0, 2.0, math.inf):
        assert w1p_error(phi, ZERO, q, p, d=1) == pytest.approx(2.0, rel=1e-14)


def test_affine_gradient_norms():
    g = Affine([3.0, -4.0])
    q = QuadratureSpec("midpoint", n=16)
    assert w1p_error(g, ZERO, q, 2.0) == pytest.approx(5.0)
    assert w1p_error(g, ZERO, q, 1.0) == pytest.approx(7.0)
    assert w1p_error(g, ZERO, q, math.inf) == pytest.approx(4.0)


def test_lp_of_linear_function():
    # int_0^1 x^2 dx = 1/3; midpoint rule error is 1/(12 n^2)
    g = Affine([1.0])
    n = 200
    val = lp_error(g, ZERO, QuadratureSpec("midpoint", n=n), 2.0)
    assert val ** 2 == pytest.approx(1 / 3 - 1 / (12 * n * n), rel=1e-12)


def test_poly_tent_gradient_norm_closed_form():
    # d=2: grad_1 = 1/4 (1-2x)(y(1-y)); ||.||_2^2 = 2 * 1/16 * 1/3 * 1/30
    f = poly_tent(2)
    exact = math.sqrt(2 / 16 / 3 / 30)
    assert w1p_error(f, ZERO, QuadratureSpec("midpoint", n=256), 2.0) == pytest.approx(exact, rel=1e-4)


def test_sup_error():
    f = sine_product(1)
    assert sup_error(f, ZERO, QuadratureSpec("midpoint", n=101)) == pytest.approx(np.pi ** -2)


def test_monte_carlo_standard_error():
    g = Affine([1.0, 1.0, 1.0])
    q = QuadratureSpec("mc", N=20000, seed=7)
    val, se = lp_error(g, ZERO, q, 2.0, with_se=True)
    exact = math.sqrt(3 * (1 / 3) + 6 * (1 / 4))
    assert se > 0
    assert abs(val - exact) <= 4 * se


def test_midpoint_nodes_cover_grid():
    X = np.concatenate(list(nodes(QuadratureSpec("midpoint", n=4), 2)))
    assert X.shape == (16, 2)
    assert set(np.round(X[:, 0] * 8).astype(int)) == {1, 3, 5, 7}


def test_midpoint_limited_to_three_dimensions():
    with pytest.raises(ValueError):
        list(nodes(QuadratureSpec("midpoint", n=4), 4))


def test_mc_nodes_reproducible():
    q = QuadratureSpec("mc", N=5000, seed=3)
    a = np.concatenate(list(nodes(q, 2)))
    b = np.concatenate(list(nodes(q, 2)))
    np.testing.assert_array_equal(a, b)


def test_default_quadrature():
    assert default_quadrature(2, 3) == QuadratureSpec("midpoint", n=32)
    assert default_quadrature(3, 3).scheme == "mc"


@pytest.mark.parametrize("kw", [dict(scheme="simpson"), dict(n=1), dict(scheme="mc", N=10)])
def test_quadrature_validation(kw):
    with pytest.raises(ValueError):
        QuadratureSpec(**kw)


def test_p_validation():
    with pytest.raises(ValueError):
        w1p_error(ZERO, ZERO, QuadratureSpec(), 0.5, d=1)


def test_measure_report():
    f = poly_tent(2)
    rep = measure(f, ZERO, QuadratureSpec("midpoint", n=32), 2.0, stats={"W": 3})
    assert rep.nodes == 32 ** 2
    assert rep.seed is None
    assert rep.value_W1p > rep.value_Lp > 0
    assert rep.stats == {"W": 3}


def test_seminorm_estimates():
    assert mixed_holder_seminorm_lb(poly_tent(2), 2.0, budget=20000) == pytest.approx(1.0, rel=1e-12)
    assert mixed_holder_seminorm_lb(poly_tent(2), 2.0, budget=2000) <= 1.0 + 1e-12


def test_seminorm_of_parabola():
    class Parabola:
        d = 1

        def value(self, X):
            return X[:, 0] * (1 - X[:, 0])

    # second difference of x(1-x) is -2h^2
    assert mixed_holder_seminorm_lb(Parabola(), 2.0, budget=5000) == pytest.approx(2.0)
