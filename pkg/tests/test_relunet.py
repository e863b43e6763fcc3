import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from faber_relu.constructors import chain_special
from faber_relu.relunet import (
    Layer,
    ReluNetwork,
    SpecialNetwork,
    architecture_key,
    bound_output,
    has_architecture,
    interval_bounds,
    parallelize,
    parallelize_size_bound,
    special_to_standard,
)
from faber_relu.verify import random_network


def dense_forward(net, X):
    """Plain dense evaluation used as an independent reference."""
    Z = X.T
    for i, layer in enumerate(net.layers):
        Z = layer.dense() @ Z + layer.bias[:, None]
        if i < len(net.layers) - 1:
            Z = np.maximum(Z, 0)
    return Z[0]


def hat_m2():
    # M2(x) = sigma(x) - 2 sigma(x - 1) + sigma(x - 2)
    return ReluNetwork.from_dense([[[1.0], [1.0], [1.0]], [[1.0, -2.0, 1.0]]],
                                  [[0.0, -1.0, -2.0], [0.0]])


def test_m2_as_three_relus():
    net = hat_m2()
    x = np.array([[0.0], [0.5], [1.0], [1.5], [2.0], [2.5]])
    np.testing.assert_array_equal(net.value(x), [0, 0.5, 1, 0.5, 0, 0])
    st_ = net.stats()
    # six weights plus the two nonzero biases
    assert (st_.W, st_.L, st_.N_w) == (8, 2, 3)


def test_hat_gadget_at_half():
    # phi_{0,0}(x) = M2(2x): peak 1 at 1/2, slope 2 on the left
    net = ReluNetwork.from_dense([[[2.0], [2.0], [2.0]], [[1.0, -2.0, 1.0]]],
                                 [[0.0, -1.0, -2.0], [0.0]])
    assert net.value(np.array([0.5])) == 1.0
    assert net.grad(np.array([0.25]))[0] == 2.0


def test_layer_rejects_bad_entries():
    with pytest.raises(ValueError):
        Layer(2, 2, [0], [0], [0.0], None)
    with pytest.raises(ValueError):
        Layer(2, 2, [0, 0], [1, 1], [1.0, 2.0], None)
    with pytest.raises(ValueError):
        Layer(2, 2, [2], [0], [1.0], None)
    with pytest.raises(ValueError):
        Layer(1, 1, [0], [0], [np.nan], None)


def test_layer_dimension_mismatch():
    with pytest.raises(ValueError):
        ReluNetwork((Layer.from_dense(np.ones((3, 2))), Layer.from_dense(np.ones((1, 2)))))


def test_zero_network():
    net = ReluNetwork.zero(3)
    s = net.stats()
    assert (s.W, s.L) == (0, 2)
    assert np.all(net.value(np.random.default_rng(0).random((5, 3))) == 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), d=st.integers(1, 4), depth=st.integers(2, 5))
def test_sparse_matches_dense(seed, d, depth):
    rng = np.random.default_rng(seed)
    net = random_network(rng, d, depth)
    X = rng.random((50, d))
    np.testing.assert_allclose(net.value(X), dense_forward(net, X), rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), d=st.integers(1, 3))
def test_gradient_matches_finite_differences(seed, d):
    rng = np.random.default_rng(seed)
    net = random_network(rng, d, 3)
    X = rng.random((20, d))
    G = net.grad(X)
    h = 1e-7
    for i in range(d):
        E = np.zeros(d)
        E[i] = h
        fd = (net.value(X + E) - net.value(X)) / h
        # a kink between x and x + h spoils the difference; such points are rare
        close = np.abs(fd - G[:, i]) <= 1e-5 * (1 + np.abs(G[:, i]))
        assert close.mean() >= 0.9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_text_round_trip_is_exact(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 3, 4)
    back = ReluNetwork.from_text(net.to_text())
    X = rng.random((40, 3))
    np.testing.assert_array_equal(back.value(X), net.value(X))
    assert architecture_key(back) == architecture_key(net)


def test_from_text_rejects_garbage():
    with pytest.raises(ValueError):
        ReluNetwork.from_text("{\"layers\": []}")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), d=st.integers(1, 3), depth=st.integers(2, 5))
def test_bound_output_dominates_samples(seed, d, depth):
    rng = np.random.default_rng(seed)
    net = random_network(rng, d, depth)
    X = rng.random((500, d))
    assert np.max(np.abs(net.value(X))) <= bound_output(net) * (1 + 1e-12) + 1e-12


def test_interval_bounds_shape():
    net = hat_m2()
    out = interval_bounds(net, [0.0], [2.0])
    assert len(out) == 2
    np.testing.assert_array_equal(out[0][0], [0.0, -1.0, -2.0])
    np.testing.assert_array_equal(out[0][1], [2.0, 1.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_parallelize_sums_outputs(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    nets = [random_network(rng, d, int(rng.integers(2, 6))) for _ in range(int(rng.integers(1, 5)))]
    lam = rng.normal(size=len(nets))
    par = parallelize(nets, lam)
    X = rng.random((300, d))
    ref = sum(l * n.value(X) for l, n in zip(lam, nets))
    scale = 1 + sum(abs(l) * bound_output(n) for l, n in zip(lam, nets))
    assert np.max(np.abs(par.value(X) - ref)) <= 1e-9 * scale
    assert par.depth == max(n.depth for n in nets)
    assert par.stats().W <= parallelize_size_bound(nets)


def test_parallelize_drops_zero_coefficients():
    a, b = hat_m2(), hat_m2()
    par = parallelize([a, b], [1.0, 0.0])
    assert par.layers[-1].nnz == 3


def test_parallelize_checks_supplied_bounds():
    rng = np.random.default_rng(1)
    deep = random_network(rng, 2, 4)
    shallow = ReluNetwork.from_dense([[[1.0, 1.0]], [[1.0]]], [[1.0], [0.0]])
    with pytest.raises(ValueError):
        parallelize([deep, shallow], [1.0, 1.0], bounds=[1.0, 0.5])
    par = parallelize([deep, shallow], [1.0, 1.0], bounds=[bound_output(deep), 3.0])
    X = rng.random((100, 2))
    np.testing.assert_allclose(par.value(X), deep.value(X) + shallow.value(X), rtol=1e-12, atol=1e-12)


def test_parallelize_argument_errors():
    with pytest.raises(ValueError):
        parallelize([hat_m2()], [1.0, 2.0])
    with pytest.raises(ValueError):
        parallelize([hat_m2(), ReluNetwork.zero(2)], [1.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_special_to_standard_preserves_output(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    nets = [random_network(rng, d, int(rng.integers(2, 5))) for _ in range(int(rng.integers(1, 4)))]
    lam = rng.normal(size=len(nets))
    special = chain_special(nets, lam, d)
    std = special_to_standard(special)
    X = rng.random((300, d))
    ref = sum(l * n.value(X) for l, n in zip(lam, nets))
    a, b = std.value(X), special.value(X)
    assert np.max(np.abs(b - ref)) <= 1e-9 * max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(b)))
    assert std.dims == special.dims
    # shifts may add bias entries but never weights
    assert sum(l.nnz for l in std.layers) == sum(l.nnz for l in special.layers)


def test_special_width_is_d_plus_block_plus_one():
    rng = np.random.default_rng(3)
    nets = [random_network(rng, 2, 3, max_width=4) for _ in range(3)]
    special = chain_special(nets, [1.0, -1.0, 0.5], 2)
    inner = max(max(l.n_out for l in n.layers[:-1]) for n in nets)
    assert special.stats().N_w == 2 + inner + 1


def test_collation_row_must_stay_private():
    # the last hidden row is the collation channel; feeding it into another row is invalid
    first = Layer.from_dense(np.array([[1.0], [1.0], [1.0]]))
    bad = Layer.from_dense(np.array([[1.0, 0, 0], [0, 1.0, 1.0], [0, 0, 1.0]]))
    with pytest.raises(ValueError):
        SpecialNetwork((first, bad, Layer.from_dense(np.ones((1, 3)))))


def test_architecture_containment():
    net = hat_m2()
    sparser = ReluNetwork.from_dense([[[1.0], [1.0], [1.0]], [[1.0, 0.0, 1.0]]],
                                     [[0.0, -1.0, -2.0], [0.0]])
    assert has_architecture(sparser, net)
    assert not has_architecture(net, sparser)
    assert architecture_key(net) != architecture_key(sparser)
