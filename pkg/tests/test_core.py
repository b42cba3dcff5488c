import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fd_grad, rel_err
from s4rl.core import (AdamState, DenseNet, SeededRng, adam_step, backend, backward, forward,
                       init_dense, load_checkpoint, polyak_update, rng_split, save_checkpoint)
from s4rl.errors import ConfigurationError, DatasetFormatError, NumericalError, ShapeError


def straight_line_forward(weights, biases, acts, x):
    """Independent re-implementation: plain loops over rows, no shared helpers."""
    out = []
    for row in np.atleast_2d(x):
        h = list(row)
        for li, (W, b) in enumerate(zip(weights, biases)):
            z = [sum(h[k] * W[k][j] for k in range(len(h))) + b[j] for j in range(len(b))]
            if li < len(weights) - 1:
                z = [max(v, 0.0) if acts[li] == "relu" else math.tanh(v) for v in z]
            h = z
        out.append(h)
    return np.array(out)


def test_zero_weights_output_bias(each_backend):
    b = np.array([0.5, -1.5])
    net = DenseNet([np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), b], ("tanh",))
    y, _ = forward(net, [1.0, 2.0, 3.0])
    assert np.array_equal(y, b)


def test_single_linear_layer(each_backend):
    net = DenseNet([np.array([[2.0]])], [np.array([1.0])], ())
    y, _ = forward(net, [3.0])
    assert y.tolist() == [7.0]


@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_forward_matches_independent_recomputation(each_backend, act):
    net = init_dense((5, 7, 6, 3), act, SeededRng(11))
    x = SeededRng(12).standard_normal((4, 5))
    y, _ = forward(net, x)
    ref = straight_line_forward([W.tolist() for W in net.weights],
                                [b.tolist() for b in net.biases], net.activations, x)
    assert np.max(np.abs(y - ref)) < 1e-12


def test_forward_width_mismatch():
    net = init_dense((3, 4, 1), "relu", SeededRng(0))
    with pytest.raises(ConfigurationError):
        forward(net, np.zeros(4))


def test_backward_linear_layer(each_backend):
    W = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    net = DenseNet([W], [np.zeros(2)], ())
    x = np.array([0.5, -1.0, 2.0])
    g = np.array([0.25, -3.0])
    _, tape = forward(net, x)
    (gW, gb), _ = backward(net, tape, g)
    assert np.array_equal(gb, g)
    assert np.allclose(gW, np.outer(x, g), rtol=0, atol=1e-15)


def test_backward_zero_grad(each_backend):
    net = init_dense((4, 8, 2), "tanh", SeededRng(3))
    _, tape = forward(net, SeededRng(4).standard_normal((5, 4)))
    grads, gx = backward(net, tape, np.zeros((5, 2)), need_input_grad=True)
    assert all(not g.any() for g in grads) and not gx.any()


def test_backward_shape_mismatch():
    net = init_dense((4, 8, 2), "tanh", SeededRng(3))
    _, tape = forward(net, np.zeros((5, 4)))
    with pytest.raises(ShapeError):
        backward(net, tape, np.zeros((5, 3)))


def _fd_check_net(seed: int) -> float:
    """Max relative error between analytic and central-difference gradients for a random net."""
    r = SeededRng(seed)
    depth = int(r.integers(1, 4))
    sizes = [int(r.integers(1, 5)) for _ in range(depth + 1)]
    act = "tanh" if r.uniform() < 0.5 else "relu"
    net = init_dense(sizes, act, r.split("net"))
    x = r.standard_normal((int(r.integers(1, 4)), sizes[0]))
    c = r.standard_normal((x.shape[0], sizes[-1]))
    loss = lambda: float(np.sum(c * forward(net, x)[0]))
    _, tape = forward(net, x)
    grads, gx = backward(net, tape, c, need_input_grad=True)
    worst = rel_err(gx, fd_grad(loss, x))
    for p, g in zip(net.params(), grads):
        worst = max(worst, rel_err(g, fd_grad(loss, p)))
    return worst


def test_gradients_match_finite_differences_100_nets(each_backend):
    errs = [_fd_check_net(s) for s in range(100)]
    assert max(errs) < 1e-4, max(errs)


def test_adam_zero_grad_fresh_state(each_backend):
    p = [np.array([1.0, -2.0])]
    st_ = AdamState.for_params(p)
    adam_step(p, [np.zeros(2)], st_)
    assert p[0].tolist() == [1.0, -2.0] and st_.step == 1


def test_adam_first_step_hand_value(each_backend):
    # t=1: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    p = [np.array([1.0])]
    st_ = AdamState.for_params(p, lr=0.1)
    adam_step(p, [np.array([1.0])], st_)
    assert abs(p[0][0] - (1.0 - 0.1 / (1.0 + 1e-8))) < 1e-15


def test_adam_matches_reference_formula_over_steps(each_backend):
    r = SeededRng(5)
    p = [r.standard_normal(6)]
    st_ = AdamState.for_params(p, lr=0.01)
    q, m, v = p[0].copy(), np.zeros(6), np.zeros(6)
    for t in range(1, 20):
        g = r.standard_normal(6)
        adam_step(p, [g], st_)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        q = q - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(p[0], q, rtol=1e-12, atol=1e-14)


def test_adam_determinism():
    def go():
        p = [np.ones(3)]
        s = AdamState.for_params(p)
        for t in range(5):
            adam_step(p, [np.full(3, 0.1 * t)], s)
        return p[0]
    assert np.array_equal(go(), go())


def test_adam_nan_names_layer():
    net = init_dense((2, 3, 1), "relu", SeededRng(0))
    st_ = AdamState.for_params(net.params(), names=net.param_names())
    grads = [np.zeros_like(p) for p in net.params()]
    grads[2][0, 0] = np.nan
    before = net.flat()
    with pytest.raises(NumericalError, match="layer1.weight"):
        adam_step(net.params(), grads, st_)
    assert np.array_equal(net.flat(), before) and st_.step == 0


def test_rng_split_reproducible_and_distinct():
    a = SeededRng(7).split("x").uniform(size=8)
    b = rng_split(SeededRng(7), "x").uniform(size=8)
    c = SeededRng(7).split("y").uniform(size=8)
    assert np.array_equal(a, b)
    assert np.all(a != c)


def test_rng_split_does_not_perturb_parent():
    p1, p2 = SeededRng(3), SeededRng(3)
    p1.uniform(size=2)
    p2.uniform(size=2)
    p1.split("child").uniform(size=100)
    assert np.array_equal(p1.uniform(size=5), p2.uniform(size=5))


def test_rng_state_roundtrip():
    r = SeededRng(9).split("a")
    r.normal(size=3)
    s = SeededRng.from_state(r.get_state())
    assert np.array_equal(r.normal(size=4), s.normal(size=4))


def test_checkpoint_roundtrip(tmp_path):
    nets = {"a": init_dense((3, 5, 2), "tanh", SeededRng(1)),
            "b": init_dense((4, 1), "relu", SeededRng(2))}
    path = tmp_path / "ck.npz"
    save_checkpoint(path, nets, seed=123, extra={"note": "x"})
    back, header, _ = load_checkpoint(path)
    assert header["seed"] == 123 and header["extra"]["note"] == "x"
    for k in nets:
        assert back[k].sizes == nets[k].sizes and back[k].activations == nets[k].activations
        assert all(np.array_equal(p, q) for p, q in zip(back[k].params(), nets[k].params()))


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, a=np.zeros(2))
    with pytest.raises(DatasetFormatError):
        load_checkpoint(path)


def test_polyak_extremes(each_backend):
    a = init_dense((3, 4, 1), "relu", SeededRng(1))
    b = init_dense((3, 4, 1), "relu", SeededRng(2))
    t = a.copy()
    polyak_update(t, b, 0.0)
    assert np.array_equal(t.flat(), a.flat())
    polyak_update(t, b, 1.0)
    assert np.array_equal(t.flat(), b.flat())


def test_param_count_invariant():
    net = init_dense((5, 7, 3), "relu", SeededRng(0))
    assert net.n_params == 5 * 7 + 7 + 7 * 3 + 3


def test_mismatched_layers_rejected():
    with pytest.raises(ShapeError):
        DenseNet([np.zeros((2, 3)), np.zeros((4, 1))], [np.zeros(3), np.zeros(1)], ("relu",))


@pytest.mark.skipif("ext" not in backend.AVAILABLE, reason="compiled kernels not built")
@given(rows=st.integers(0, 40), k=st.integers(1, 9), n=st.integers(1, 9), act=st.sampled_from([0, 1, 2]),
       seed=st.integers(0, 2**16))
def test_backends_agree(rows, k, n, act, seed):
    r = SeededRng(seed)
    x = r.standard_normal((rows, k))
    W = r.standard_normal((k, n))
    b = r.standard_normal(n)
    py, ext = backend.AVAILABLE["python"], backend.AVAILABLE["ext"]
    h1, h2 = py.dense_forward(x, W, b, act), ext.dense_forward(x, W, b, act)
    assert np.allclose(h1, h2, rtol=1e-13, atol=1e-13)
    gh = r.standard_normal(h1.shape)
    for a_, b_ in zip(py.dense_backward(x, W, h1, gh, act), ext.dense_backward(x, W, h1, gh, act)):
        assert np.allclose(a_, b_, rtol=1e-12, atol=1e-12)


def test_backend_override_rejects_unknown():
    with pytest.raises(ValueError):
        backend.set_backend("gpu")


def test_relu_kernel_propagates_nan(each_backend):
    h = backend.kernels.dense_forward(np.array([[np.nan], [-1.0]]), np.ones((1, 1)), np.zeros(1), 1)
    assert np.isnan(h[0, 0]) and h[1, 0] == 0.0


def test_forward_reports_non_finite():
    net = DenseNet([np.ones((1, 1)), np.ones((1, 1))], [np.zeros(1), np.zeros(1)], ("relu",))
    with pytest.raises(NumericalError):
        forward(net, [np.nan])
