"""Tensor core: kernels, tape traversal, losses, Adam, RNG and the tensor file format."""

import numpy as np
import pytest

from deepadapt.core import (
    AdamState,
    RngStream,
    Tape,
    Tensor,
    adam_step,
    channel_mix,
    conv2d,
    dropout,
    fully_connected,
    leaky_relu,
    load_checkpoint,
    maxpool2,
    save_checkpoint,
    sigmoid_binary_cross_entropy,
    softmax,
    softmax_cross_entropy,
    xavier_bound,
    xavier_init,
)
from deepadapt.core.checkpoint import MAGIC, decode_tensors, encode_tensors
from deepadapt.errors import CheckpointError, DimensionError, LabelError, ParameterError
from deepadapt.gradcheck import project


def _serial_conv(x, w, b):
    """Reference loop: bias first, then taps in (c_in, ky, kx) order."""
    n, c_in, h, wd = x.shape
    c_out = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.empty((n, c_out, h, wd))
    for i in range(n):
        for o in range(c_out):
            for y in range(h):
                for xx in range(wd):
                    acc = b[o]
                    for c in range(c_in):
                        for ky in range(3):
                            for kx in range(3):
                                acc = acc + w[o, c, ky, kx] * xp[i, c, y + ky, xx + kx]
                    out[i, o, y, xx] = acc
    return out


@pytest.fixture
def conv_inputs():
    rng = RngStream(3)
    x = rng.split("x").normal(size=(2, 3, 5, 7))
    w = rng.split("w").normal(size=(4, 3, 3, 3))
    b = rng.split("b").normal(size=(4,))
    return x, w, b


def test_conv_direct_matches_serial_loop_bitwise(conv_inputs):
    x, w, b = conv_inputs
    out = conv2d(Tensor(x), Tensor(w), Tensor(b), method="direct")
    np.testing.assert_array_equal(out.data, _serial_conv(x, w, b))


def test_conv_gemm_agrees_with_direct(conv_inputs):
    x, w, b = conv_inputs
    direct = conv2d(Tensor(x), Tensor(w), Tensor(b), method="direct").data
    gemm = conv2d(Tensor(x), Tensor(w), Tensor(b), method="gemm").data
    np.testing.assert_allclose(gemm, direct, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("method", ["direct", "gemm"])
def test_conv_identity_and_all_ones_kernels(method):
    x = RngStream(0).normal(size=(1, 1, 3, 3))
    identity = np.zeros((1, 1, 3, 3))
    identity[0, 0, 1, 1] = 1.0
    out = conv2d(Tensor(x), Tensor(identity), Tensor(np.zeros(1)), method=method)
    np.testing.assert_array_equal(out.data, x)
    ones = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)), method=method)
    assert ones.data[0, 0, 1, 1] == 9.0
    assert ones.data[0, 0, 0, 0] == 4.0


def _serial_maxpool(x):
    n, c, h, w = x.shape
    out = np.empty((n, c, h // 2, w // 2))
    for i in range(n):
        for j in range(c):
            for y in range(h // 2):
                for xx in range(w // 2):
                    out[i, j, y, xx] = max(x[i, j, 2 * y + dy, 2 * xx + dx] for dy in (0, 1) for dx in (0, 1))
    return out


def test_conv_and_pool_match_brute_force_over_random_shapes():
    rng = RngStream(21)
    for draw in range(50):
        r = rng.split(f"draw/{draw}")
        n, c_in, c_out = (int(v) for v in r.integers(1, 4, 3))
        n = min(n, 2)
        h, w = (int(v) for v in r.integers(2, 7, 2))
        x = r.split("x").normal(size=(n, c_in, h, w))
        k = r.split("k").normal(size=(c_out, c_in, 3, 3))
        b = r.split("b").normal(size=(c_out,))
        expected = _serial_conv(x, k, b)
        np.testing.assert_array_equal(conv2d(Tensor(x), Tensor(k), Tensor(b), method="direct").data, expected)
        np.testing.assert_allclose(conv2d(Tensor(x), Tensor(k), Tensor(b), method="gemm").data, expected,
                                   rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(maxpool2(Tensor(x)).data, _serial_maxpool(x))


def test_conv_keeps_spatial_size_and_rejects_channel_mismatch():
    x = Tensor(np.ones((1, 2, 4, 4)))
    out = conv2d(x, Tensor(np.zeros((3, 2, 3, 3))), Tensor(np.zeros(3)))
    assert out.shape == (1, 3, 4, 4)
    with pytest.raises(DimensionError):
        conv2d(x, Tensor(np.zeros((3, 5, 3, 3))), Tensor(np.zeros(3)))
    with pytest.raises(ParameterError):
        conv2d(x, Tensor(np.zeros((3, 2, 3, 3))), Tensor(np.zeros(3)), method="fft")


def test_maxpool_values_and_gradient_routing():
    x = Tensor(np.array([[[[1.0, 3.0, 2.0, 0.0, 9.0],
                           [3.0, 2.0, 5.0, 5.0, 9.0],
                           [0.0, 0.0, 1.0, 1.0, 9.0]]]]), requires_grad=True)
    with Tape() as tape:
        y = maxpool2(x)
        loss = project(y, np.ones(y.shape))
    np.testing.assert_array_equal(y.data, [[[[3.0, 5.0]]]])
    tape.backward(loss)
    expected = np.zeros((1, 1, 3, 5))
    expected[0, 0, 0, 1] = 1.0  # first 3 in row-major order wins the tie
    expected[0, 0, 1, 2] = 1.0  # first 5 wins
    np.testing.assert_array_equal(x.grad, expected)


def _sum(t):
    return project(t, np.ones(t.shape))


def test_leaky_relu_slope_and_derivative_at_zero():
    x = Tensor(np.array([-2.0, 0.0, 3.0]), requires_grad=True)
    with Tape() as tape:
        y = leaky_relu(x, 0.1)
        loss = _sum(y)
    tape.backward(loss)
    np.testing.assert_allclose(y.data, [-0.2, 0.0, 3.0])
    np.testing.assert_allclose(x.grad, [0.1, 1.0, 1.0])


def test_ops_outside_tape_are_not_recorded():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    y = leaky_relu(x)
    assert not y.requires_grad
    with Tape() as tape:
        leaky_relu(x)
    assert len(tape) == 1


def _graph_grads(traversal):
    rng = RngStream(8)
    x = Tensor(rng.split("x").normal(size=(2, 1, 4, 4)))
    k = Tensor(rng.split("k").normal(size=(2, 1, 3, 3)), requires_grad=True)
    b = Tensor(np.zeros(2), requires_grad=True)
    alpha = Tensor(np.full(2, 0.3), requires_grad=True)
    with Tape() as tape:
        h = leaky_relu(conv2d(x, k, b))
        # h feeds both inputs of the mix, so its gradient is accumulated twice
        mixed = channel_mix(h, leaky_relu(h, 0.2), alpha)
        loss = _sum(mixed)
    tape.backward(loss, traversal)
    return k.grad.copy(), b.grad.copy(), alpha.grad.copy(), tape


def test_recorded_and_dfs_traversals_agree_and_visit_once():
    rec = _graph_grads("recorded")
    dfs = _graph_grads("dfs")
    for a, b in zip(rec[:3], dfs[:3]):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    for tape in (rec[3], dfs[3]):
        assert all(node.visits == 1 for node in tape.nodes)


def test_backward_rejects_non_scalar_and_unknown_traversal():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = leaky_relu(x)
    with pytest.raises(DimensionError):
        tape.backward(y)
    with Tape() as tape:
        loss = _sum(leaky_relu(x))
    with pytest.raises(ParameterError):
        tape.backward(loss, "bfs")


def test_dropout_is_identity_at_inference_and_scales_survivors():
    x = Tensor(np.ones((4, 50)))
    assert dropout(x, 0.5, training=False, rng=None) is x
    out = dropout(x, 0.5, training=True, rng=RngStream(1))
    assert set(np.unique(out.data)) <= {0.0, 2.0}
    again = dropout(x, 0.5, training=True, rng=RngStream(1))
    np.testing.assert_array_equal(out.data, again.data)
    with pytest.raises(ParameterError):
        dropout(x, 1.0, training=True, rng=RngStream(1))


def test_dropout_preserves_the_expected_activation():
    x = Tensor(np.ones((200, 500)))
    out = dropout(x, 0.3, training=True, rng=RngStream(4)).data
    assert out.mean() == pytest.approx(1.0, abs=0.01)
    assert (out == 0.0).mean() == pytest.approx(0.3, abs=0.01)


def test_softmax_rows_are_distributions():
    logits = RngStream(6).normal(scale=30.0, size=(8, 11))
    logits[0, 3] = 1e4
    p = softmax(logits)
    np.testing.assert_allclose(p.sum(axis=1), np.ones(8), rtol=0, atol=1e-12)
    assert np.all(p >= 0.0) and np.all(p <= 1.0)
    assert p[0, 3] == pytest.approx(1.0)


def test_softmax_cross_entropy_uniform_logits_is_log_k():
    loss = softmax_cross_entropy(Tensor(np.zeros((3, 5))), np.array([0, 2, 4]))
    assert loss.item() == pytest.approx(np.log(5))
    with pytest.raises(LabelError):
        softmax_cross_entropy(Tensor(np.zeros((1, 5))), np.array([5]))
    with pytest.raises(DimensionError):
        softmax_cross_entropy(Tensor(np.zeros((2, 5))), np.array([0]))


def test_softmax_cross_entropy_is_stable_for_large_logits():
    loss = softmax_cross_entropy(Tensor(np.array([[1000.0, 0.0]])), np.array([0]))
    assert np.isfinite(loss.item())
    assert loss.item() == pytest.approx(0.0, abs=1e-12)


def test_sigmoid_bce_at_zero_logits_is_log_two():
    loss = sigmoid_binary_cross_entropy(Tensor(np.zeros((2, 3))), np.array([[0, 1, 1], [1, 0, 0]]))
    assert loss.item() == pytest.approx(np.log(2))
    with pytest.raises(LabelError):
        sigmoid_binary_cross_entropy(Tensor(np.zeros((1, 2))), np.array([[0, 2]]))


def test_adam_first_step_moves_by_learning_rate():
    p = Tensor(np.array([1.0, -1.0, 0.5]), requires_grad=True)
    state = AdamState(learning_rate=0.1)
    adam_step({"p": p}, {"p": np.array([2.0, -3.0, 0.0])}, state)
    np.testing.assert_allclose(p.data, [0.9, -0.9, 0.5], atol=1e-6)
    assert state.step == 1


def test_adam_with_zero_learning_rate_leaves_parameters_unchanged():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    state = AdamState(learning_rate=0.0)
    for _ in range(3):
        adam_step({"p": p}, {"p": np.array([5.0, -5.0])}, state)
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


def test_adam_is_deterministic_over_a_hundred_steps():
    def run():
        rng = RngStream(12)
        p = Tensor(rng.split("init").normal(size=(5, 3)), requires_grad=True)
        state = AdamState(learning_rate=1e-2)
        for step in range(100):
            adam_step({"p": p}, {"p": rng.split(f"grad/{step}").normal(size=(5, 3))}, state)
        return p.data, state

    (a, sa), (b, sb) = run(), run()
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(sa.first_moment["p"], sb.first_moment["p"])
    np.testing.assert_array_equal(sa.second_moment["p"], sb.second_moment["p"])
    assert sa.step == sb.step == 100


def test_adam_rejects_gradients_for_unknown_parameters():
    with pytest.raises(DimensionError):
        adam_step({"p": Tensor(np.zeros(2))}, {"q": np.zeros(2)}, AdamState())


def test_rng_streams_are_reproducible_and_split_ignores_parent_draws():
    a, b = RngStream(42), RngStream(42)
    np.testing.assert_array_equal(a.random(5), b.random(5))
    child_before = RngStream(42).split("batch/3").random(4)
    a.random(100)
    np.testing.assert_array_equal(a.split("batch/3").random(4), child_before)
    assert not np.array_equal(a.split("batch/4").random(4), child_before)


def test_rng_state_is_seed_and_counter():
    r = RngStream(7)
    r.random(1)
    r.random(1)
    assert r.to_dict() == {"seed": 7, "counter": 2}
    np.testing.assert_array_equal(RngStream(7, counter=2).random(3), r.random(3))


def test_xavier_init_stays_within_bound():
    t = xavier_init((16, 8, 3, 3), RngStream(0))
    bound = xavier_bound(8 * 9, 16 * 9)
    assert np.abs(t.data).max() <= bound
    assert t.requires_grad


def test_xavier_variance_matches_the_uniform_bound():
    shape = (64, 32, 3, 3)
    data = xavier_init(shape, RngStream(1)).data
    fan_in, fan_out = 32 * 9, 64 * 9
    assert data.var() == pytest.approx(2.0 / (fan_in + fan_out), rel=0.05)
    assert abs(data.mean()) < 0.03 * xavier_bound(fan_in, fan_out)


def test_tensor_file_preserves_names_order_and_values(tmp_path):
    tensors = {"b": np.arange(6.0).reshape(2, 3), "a": np.array(3.5), "c": np.full((1, 2, 2), -1.25)}
    save_checkpoint(tmp_path / "t.adnet", tensors)
    loaded = load_checkpoint(tmp_path / "t.adnet")
    assert list(loaded) == ["b", "a", "c"]
    for name, arr in tensors.items():
        np.testing.assert_array_equal(loaded[name], arr)
        assert loaded[name].shape == arr.shape


def test_tensor_file_rejects_bad_magic_and_trailing_bytes():
    blob = encode_tensors({"x": np.ones(2)})
    assert blob.startswith(MAGIC)
    with pytest.raises(CheckpointError):
        decode_tensors(b"NOTACKPT" + blob[8:])
    with pytest.raises(CheckpointError):
        decode_tensors(blob + b"\x00")
    with pytest.raises(CheckpointError):
        decode_tensors(blob[:-3])
