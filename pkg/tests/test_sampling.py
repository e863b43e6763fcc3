import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from faber_relu.corpus import poly_tent, sine_product
from faber_relu.faber import lambda_coefficient, single_term
from faber_relu.index import cardinality_D, enumerate_notched, grid_points
from faber_relu.metrics import QuadratureSpec, ZERO, w1p_error
from faber_relu.sampling import ApproxConfig, build_R, qk_layer, qk_norm_bound, theorem31_bound


def test_K1_value():
    assert ApproxConfig(2, 2.0, 3.0, 2.0).K1 == pytest.approx(6 * math.sqrt(3), rel=1e-15)


def test_K1_limit_at_infinity():
    cfg = ApproxConfig(2, 1.5, 2.5, math.inf)
    assert cfg.K1 == pytest.approx(2 * max(5 / 1.5, 1 / (2 ** 0.5 - 1)))


def test_bound_value():
    # each factor recomputed by hand: K1 d^2 2^-4 / (3 * 2^6 * (1 - 2^-1/2)^2)
    K1 = 2 * math.sqrt(3) * 3
    expected = K1 * 4 * 2.0 ** -4 / (3 * 64 * (1 - 2 ** -0.5) ** 2)
    assert theorem31_bound(ApproxConfig(2, 2.0, 3.0, 2.0), 4) == pytest.approx(expected, rel=1e-14)
    assert theorem31_bound(ApproxConfig(2, 2.0, 3.0, 2.0), 4) == pytest.approx(0.15773643606676, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(1.05, 2.0), gap=st.floats(0.1, 3.0), p=st.sampled_from([1.0, 2.0, 3.5, math.inf]),
       d=st.integers(2, 5), m=st.integers(0, 10))
def test_bound_decays_by_fixed_factor(alpha, gap, p, d, m):
    cfg = ApproxConfig(d, alpha, alpha + gap, p)
    ratio = theorem31_bound(cfg, m + 1) / theorem31_bound(cfg, m)
    assert ratio == pytest.approx(2 ** -(alpha - 1), rel=1e-12)


def test_bound_dimension_ratio():
    a, b, p = 2.0, 3.0, 2.0
    for d in (3, 4, 5):
        lhs = theorem31_bound(ApproxConfig(d, a, b, p), 5) / theorem31_bound(ApproxConfig(d - 1, a, b, p), 5)
        rhs = d ** 2 / (d - 1) ** 2 / ((p + 1) ** (1 / p) * 2 ** (a + 1) * (1 - 2 ** (-(b - a) / (b - 1))))
        assert lhs == pytest.approx(rhs, rel=1e-13)


@pytest.mark.parametrize("args", [(2, 1.0, 2.0), (2, 2.5, 3.0), (2, 2.0, 2.0), (2, 2.0, 1.5), (0, 2.0, 3.0)])
def test_invalid_config(args):
    with pytest.raises(ValueError):
        ApproxConfig(*args)


def test_invalid_p():
    with pytest.raises(ValueError):
        ApproxConfig(2, 2.0, 3.0, 0.5)


def test_term_count_and_interpolation():
    f = poly_tent(2)
    cfg = ApproxConfig(2, 2.0, 2.5)
    R = build_R(f.value, ApproxConfig(2, 1.5, 2.0), 3)
    assert R.n_terms == 33
    S = enumerate_notched(2, 2.5, 4)
    R = build_R(f.value, cfg, 4)
    assert R.n_terms == cardinality_D(S)
    X = grid_points(S).points
    assert np.max(np.abs(R(X) - f(X))) <= 1e-12


def test_coefficients_are_restrictions():
    f = sine_product(2)
    cfg = ApproxConfig(2, 2.0, 3.0)
    R4, R5 = build_R(f.value, cfg, 4), build_R(f.value, cfg, 5)
    for (k, s), c in R4.items():
        assert c == lambda_coefficient(f.value, k, s)
        assert R5.coefficients[k][s] == c


def test_own_truncation_reproduced(rng):
    t = single_term((1, 0), (1, 0), 0.3)
    R = build_R(t, ApproxConfig(2, 2.0, 3.0), 3)
    X = rng.random((500, 2))
    np.testing.assert_allclose(R(X), t(X), rtol=0, atol=1e-15)


def test_comparison_index_sets():
    f = poly_tent(2)
    cfg = ApproxConfig(2, 2.0, 3.0)
    assert build_R(f.value, cfg, 3, "smolyak").n_terms == sum((l + 1) * 2 ** l for l in range(4))
    assert build_R(f.value, cfg, 2, "full").n_terms == 7 * 7


def test_layer_sizes():
    f = poly_tent(2)
    assert qk_layer(f.value, (0, 0)).n_terms == 1
    assert qk_layer(f.value, (2, 1)).n_terms == 8


@pytest.mark.parametrize("k", [(0, 0), (1, 0), (2, 1), (3, 3)])
@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_layer_norm_bound(k, p):
    for f in (poly_tent(2), sine_product(2)):
        q = qk_layer(f.value, k)
        norm = w1p_error(q, ZERO, QuadratureSpec("midpoint", n=2 ** (max(k) + 4)), p, d=2)
        assert norm <= qk_norm_bound(2, 2.0, p, k) * 1.01


def test_error_decreases_with_m():
    f = sine_product(2)
    cfg = ApproxConfig(2, 2.0, 3.0)
    errs = [w1p_error(f, build_R(f.value, cfg, m), QuadratureSpec("midpoint", n=2 ** (m + 2)), 2.0)
            for m in range(1, 6)]
    assert all(b <= a * 1.05 for a, b in zip(errs, errs[1:]))
    assert all(e <= theorem31_bound(cfg, m) for m, e in zip(range(1, 6), errs))
