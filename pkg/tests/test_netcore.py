import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdpg import netcore as nc
from sdpg.oracles import central_difference, naive_dense_forward


def net_from(dims, weights, biases, out="identity"):
    return nc.DenseNet(dims, [np.array(w, dtype=float) for w in weights],
                       [np.array(b, dtype=float) for b in biases], "relu", out)


def random_net(seed, dims=(3, 4, 2), out="identity"):
    return nc.init_net(list(dims), np.random.default_rng(seed), output_activation=out)


def test_zero_net_gives_zero_output():
    net = nc.zeros_like_net(random_net(0, (5, 7, 3)))
    assert np.array_equal(nc.forward(net, np.arange(5.0)), np.zeros(3))


def test_one_by_one_affine_by_hand():
    net = net_from([1, 1], [[[2.0]]], [[1.0]])
    assert nc.forward(net, [3.0]).tolist() == [7.0]


@pytest.mark.parametrize("out", ["identity", "tanh"])
def test_forward_matches_loop_oracle(out):
    rng = np.random.default_rng(1)
    for seed in range(20):
        net = random_net(seed, (3, 4, 2), out)
        x = rng.normal(size=3)
        ref = naive_dense_forward(net.layer_dims, net.weights, net.biases, x, out)
        np.testing.assert_allclose(nc.forward(net, x), ref, rtol=0, atol=1e-12)


def test_forward_rejects_wrong_length():
    net = random_net(0)
    with pytest.raises(nc.ShapeError):
        nc.forward(net, np.ones(4))


def test_layer_shape_invariant_enforced():
    with pytest.raises(nc.ShapeError):
        net_from([2, 3], [np.zeros((2, 3))], [np.zeros(3)])


def test_forward_batch_single_row_equals_forward():
    net = random_net(2, (6, 16, 16, 3))
    x = np.random.default_rng(0).normal(size=6)
    assert np.array_equal(nc.forward_batch(net, x[None])[0], nc.forward(net, x))


def test_forward_batch_identical_rows():
    net = random_net(3)
    x = np.random.default_rng(0).normal(size=3)
    out = nc.forward_batch(net, np.stack([x, x]))
    assert np.array_equal(out[0], out[1])


def test_forward_batch_is_bit_identical_to_mapped_forward():
    net = random_net(4, (7, 64, 64, 5), "tanh")
    X = np.random.default_rng(1).normal(size=(300, 7))
    batch = nc.forward_batch(net, X)
    rows = np.stack([nc.forward(net, x) for x in X])
    assert np.array_equal(batch, rows)
    # independent loop oracle
    for k in (0, 17, 299):
        ref = naive_dense_forward(net.layer_dims, net.weights, net.biases, X[k], "tanh")
        np.testing.assert_allclose(batch[k], ref, atol=1e-12, rtol=0)


def test_forward_batch_rejects_ragged():
    net = random_net(0)
    with pytest.raises(nc.ShapeError):
        nc.forward_batch(net, [[1.0, 2.0, 3.0], [1.0, 2.0]])


def test_backward_linear_case():
    net = net_from([1, 1], [[[1.0]]], [[0.0]])
    g = nc.backward(net, [2.0], [1.0])
    assert g.weight_grads[0].tolist() == [[2.0]]
    assert g.bias_grads[0].tolist() == [1.0]
    assert g.input_grad.tolist() == [1.0]


def test_backward_rejects_non_finite_upstream():
    net = random_net(0)
    with pytest.raises(nc.NumericError):
        nc.backward(net, np.ones(3), [np.nan, 0.0])


def test_relu_subgradient_at_zero_is_zero():
    # hidden pre-activation exactly 0 -> no gradient flows through that unit
    net = net_from([1, 1, 1], [[[1.0]], [[1.0]]], [[0.0], [0.0]])
    g = nc.backward(net, [0.0], [1.0])
    assert g.input_grad.tolist() == [0.0]
    assert g.weight_grads[0].tolist() == [[0.0]]


def _away_from_kinks(net, x, margin=1e-3):
    tape = nc.forward_tape(net, np.asarray(x, float)[None], fast=False)
    return all(np.min(np.abs(p)) > margin for p in tape.pre[:-1])


@pytest.mark.parametrize("out", ["identity", "tanh"])
def test_param_and_input_grads_match_finite_differences(out):
    rng = np.random.default_rng(5)
    checked = 0
    for seed in range(40):
        net = random_net(seed, (4, 6, 5, 3), out)
        x = rng.normal(size=4)
        if not _away_from_kinks(net, x):
            continue
        u = rng.normal(size=3)
        g = nc.backward(net, x, u)
        f_x = lambda xx: float(u @ nc.forward(net, xx))  # noqa: E731
        np.testing.assert_allclose(g.input_grad, central_difference(f_x, x, 1e-5), rtol=1e-4, atol=1e-9)
        for p, gp in zip(net.params(), g.param_grads()):
            def f_p(pp, p=p):
                old = p.copy()
                p[...] = pp
                val = float(u @ nc.forward(net, x))
                p[...] = old
                return val
            np.testing.assert_allclose(gp, central_difference(f_p, p.copy(), 1e-5), rtol=1e-4, atol=1e-9)
        checked += 1
    assert checked >= 20


def test_sgd_minimize_and_maximize():
    for direction, expected in (("minimize", 0.9), ("maximize", 1.1)):
        net = net_from([1, 1], [[[1.0]]], [[0.0]])
        grads = nc.GradBundle([np.array([[1.0]])], [np.array([0.0])], None)
        nc.apply_step(nc.Optimizer("sgd", 0.1), net, grads, direction)
        assert net.weights[0][0, 0] == pytest.approx(expected, abs=1e-15)


def test_adam_first_step_by_hand():
    lr, g, eps = 0.01, 0.3, 1e-8
    net = net_from([1, 1], [[[1.0]]], [[0.0]])
    grads = nc.GradBundle([np.array([[g]])], [np.array([0.0])], None)
    nc.Optimizer("adam", lr, eps=eps).apply_step(net, grads, "minimize")
    # bias-corrected moments after one step are g and g^2
    assert net.weights[0][0, 0] == pytest.approx(1.0 - lr * g / (np.sqrt(g * g) + eps), abs=1e-15)


def test_adam_second_step_by_hand():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    gs = [0.3, -0.5]
    net = net_from([1, 1], [[[1.0]]], [[0.0]])
    opt = nc.Optimizer("adam", lr, b1, b2, eps)
    p, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate(gs, 1):
        opt.apply_step(net, nc.GradBundle([np.array([[g]])], [np.array([0.0])], None))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert net.weights[0][0, 0] == pytest.approx(p, abs=1e-15)


def test_apply_step_rejects_shape_mismatch():
    net = random_net(0)
    other = random_net(0, (3, 5, 2))
    g = nc.backward(other, np.ones(3), np.ones(2))
    with pytest.raises(nc.ShapeError):
        nc.Optimizer().apply_step(net, g)


def test_soft_update_tau_one_is_copy():
    src, dst = random_net(0), random_net(1)
    nc.soft_update(src, dst, 1.0)
    for a, b in zip(src.params(), dst.params()):
        assert np.array_equal(a, b)


def test_soft_update_half():
    src = net_from([1, 1], [[[2.0]]], [[2.0]])
    dst = net_from([1, 1], [[[0.0]]], [[0.0]])
    nc.soft_update(src, dst, 0.5)
    assert dst.weights[0][0, 0] == 1.0 and dst.biases[0][0] == 1.0


def test_soft_update_geometric_convergence():
    src = net_from([1, 1], [[[3.0]]], [[0.0]])
    dst = net_from([1, 1], [[[1.0]]], [[0.0]])
    tau = 0.1
    gap = 2.0
    for _ in range(30):
        nc.soft_update(src, dst, tau)
        gap *= 1 - tau
        assert abs(src.weights[0][0, 0] - dst.weights[0][0, 0]) == pytest.approx(gap, rel=1e-12)


@pytest.mark.parametrize("tau", [0.0, -0.1, 1.5])
def test_soft_update_rejects_bad_tau(tau):
    with pytest.raises(ValueError):
        nc.soft_update(random_net(0), random_net(1), tau)


def test_copy_and_soft_update_reject_shape_mismatch():
    with pytest.raises(nc.ShapeError):
        nc.copy_params(random_net(0), random_net(0, (3, 5, 2)))
    with pytest.raises(nc.ShapeError):
        nc.soft_update(random_net(0), random_net(0, (3, 5, 2)), 0.5)


def test_forward_has_no_hidden_state():
    net = random_net(9, (3, 8, 2))
    x = np.array([0.1, -0.2, 0.3])
    assert np.array_equal(nc.forward(net, x), nc.forward(net, x))


def test_parameter_record_round_trip_and_layout():
    net = random_net(7, (3, 4, 2), "tanh")
    data = nc.net_to_bytes(net)
    assert data[:8] == b"SDPGNET\0"
    n_params = sum(p.size for p in net.params())
    assert len(data) == 8 + 4 + 4 + 4 * 3 + 2 + 8 * n_params
    back = nc.net_from_bytes(data)
    assert back.layer_dims == net.layer_dims and back.output_activation == "tanh"
    for a, b in zip(net.params(), back.params()):
        assert np.array_equal(a, b)
    # first weight is stored right after the header, row-major
    first = np.frombuffer(data, "<f8", 1, 8 + 4 + 4 + 12 + 2)[0]
    assert first == net.weights[0][0, 0]


def test_parameter_record_rejects_garbage():
    with pytest.raises(ValueError):
        nc.net_from_bytes(b"nonsense" * 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 6))
def test_batch_equals_rows_property(seed, width, rows):
    net = random_net(seed, (3, width, 2))
    X = np.random.default_rng(seed).normal(size=(rows, 3))
    assert np.array_equal(nc.forward_batch(net, X), np.stack([nc.forward(net, x) for x in X]))
