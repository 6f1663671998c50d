import numpy as np
import pytest

from pursuit_hrl import nets
from pursuit_hrl.nets import (Adam, DivergenceError, Mlp, ReplayBuffer,
                              load_checkpoint, load_mlp_tensors, mlp_tensors,
                              save_checkpoint, soft_update)


def fd_param_grads(net, x, loss_fn, h=1e-5):
    """Central finite differences of loss_fn(net.forward(x)) w.r.t. params."""
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            hi = loss_fn(net.forward(x, cache=False))
            p[idx] = orig - h
            lo = loss_fn(net.forward(x, cache=False))
            p[idx] = orig
            g[idx] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a, b):
    num = np.linalg.norm(a - b)
    den = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return num / den


def test_forward_zero_net():
    net = Mlp([3, 4, 2])
    for w in net.weights:
        w[:] = 0
    assert np.array_equal(net.forward(np.ones((5, 3))), np.zeros((5, 2)))


def test_forward_identity_layer():
    net = Mlp([3, 3])
    net.weights[0] = np.eye(3)
    x = np.array([[0.3, -1.2, 4.0]])
    assert np.allclose(net.forward(x), x)


def test_forward_matches_matrix_oracle():
    rng = np.random.default_rng(11)
    net = Mlp([2, 8, 1], rng=rng)
    x = rng.normal(size=(4, 2))
    h = np.maximum(x @ net.weights[0] + net.biases[0], 0.0)
    want = h @ net.weights[1] + net.biases[1]
    assert np.allclose(net.forward(x), want, atol=1e-12)


def test_forward_width_mismatch():
    net = Mlp([3, 4, 2])
    with pytest.raises(ValueError):
        net.forward(np.ones((1, 5)))


def test_backward_linear_closed_form():
    # single linear layer, squared loss: dL/dW = 2 (yhat - y) x
    net = Mlp([3, 1])
    net.weights[0] = np.array([[1.0], [2.0], [3.0]])
    x = np.array([[0.5, -1.0, 2.0]])
    y = 1.0
    out = net.forward(x)
    err = out[0, 0] - y
    grads, _ = net.backward(np.array([[2 * err]]))
    assert np.allclose(grads[0], 2 * err * x.T)
    assert np.allclose(grads[1], [2 * err])


def test_backward_zero_grad():
    net = Mlp([3, 6, 2], rng=np.random.default_rng(3))
    net.forward(np.ones((2, 3)))
    grads, g_in = net.backward(np.zeros((2, 2)))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(g_in == 0)


@pytest.mark.parametrize("head,out_w", [("linear", 2), ("tanh", 2), ("gauss", 4)])
def test_backward_vs_finite_differences(head, out_w):
    rng = np.random.default_rng(0)
    for trial in range(5):
        net = Mlp([3, 6, out_w], head=head, rng=rng)
        x = rng.normal(size=(4, 3))
        t = rng.normal(size=(4, out_w))

        def loss_fn(out):
            return float(np.sum((out - t) ** 2))

        out = net.forward(x)
        analytic, _ = net.backward(2.0 * (out - t))
        numeric = fd_param_grads(net, x, loss_fn)
        for a, n in zip(analytic, numeric):
            assert rel_err(a, n) <= 1e-4


def test_backward_input_gradient_vs_fd():
    rng = np.random.default_rng(1)
    net = Mlp([4, 8, 1], rng=rng)
    x = rng.normal(size=(1, 4))
    out = net.forward(x)
    _, g_in = net.backward(np.ones_like(out))
    h = 1e-5
    for k in range(4):
        xp, xm = x.copy(), x.copy()
        xp[0, k] += h
        xm[0, k] -= h
        fd = (net.forward(xp, cache=False) - net.forward(xm, cache=False)) / (2 * h)
        assert abs(g_in[0, k] - fd[0, 0]) <= 1e-6 * max(1, abs(fd[0, 0]))


def test_gauss_head_logvar_bounds():
    rng = np.random.default_rng(2)
    net = Mlp([2, 8, 6], head="gauss", rng=rng)
    net.biases[-1][:] = 1e6  # push the raw log-variance far out of range
    out = net.forward(rng.normal(size=(3, 2)), cache=False)
    lv = out[:, 3:]
    assert np.all(lv >= nets.LOGVAR_MIN) and np.all(lv <= nets.LOGVAR_MAX)
    assert np.all(np.isfinite(np.exp(lv)))


def test_adam_zero_grad_no_move():
    net = Mlp([2, 2], rng=np.random.default_rng(0))
    before = [p.copy() for p in net.parameters()]
    adam = Adam(net.parameters(), lr=0.1)
    adam.step(net.parameters(), [np.zeros_like(p) for p in net.parameters()])
    for b, p in zip(before, net.parameters()):
        assert np.array_equal(b, p)


def test_adam_first_step_is_signed_lr():
    p = np.array([1.0, -2.0])
    adam = Adam([p], lr=1e-3)
    g = np.array([0.4, -7.0])
    adam.step([p], [g])
    # bias-corrected first step: -lr * g / (|g| + eps) ~ -lr * sign(g)
    assert np.allclose(p, [1.0 - 1e-3, -2.0 + 1e-3], atol=1e-6)


def test_adam_divergence_error():
    p = np.array([1.0])
    adam = Adam([p], lr=1e-3)
    with pytest.raises(DivergenceError):
        adam.step([p], [np.array([np.nan])])


def test_soft_update_examples():
    t = [np.zeros(3)]
    o = [np.ones(3)]
    soft_update(t, o, 0.0)
    assert np.array_equal(t[0], np.zeros(3))
    soft_update(t, o, 0.01)
    assert np.allclose(t[0], 0.01)


def test_soft_update_contraction():
    rng = np.random.default_rng(5)
    t = [rng.normal(size=(4, 4))]
    o = [rng.normal(size=(4, 4))]
    before = np.linalg.norm(t[0] - o[0])
    soft_update(t, o, 0.3)
    assert np.isclose(np.linalg.norm(t[0] - o[0]), 0.7 * before)


def test_replay_ring_overwrite():
    buf = ReplayBuffer(3, seed=0)
    for k in range(5):
        buf.add(k)
    assert len(buf) == 3
    assert sorted(buf.items) == [2, 3, 4]


def test_replay_sample_without_replacement():
    buf = ReplayBuffer(10, seed=0)
    for k in range(10):
        buf.add(k)
    batch = buf.sample(10)
    assert sorted(batch) == list(range(10))


def test_replay_sampling_coverage_chi_square():
    buf = ReplayBuffer(8, seed=42)
    for k in range(8):
        buf.add(k)
    counts = np.zeros(8)
    draws = 4000
    for _ in range(draws):
        for item in buf.sample(2):
            counts[item] += 1
    expected = draws * 2 / 8
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # 7 dof; p > 0.001 corresponds to chi2 below ~24.3
    assert chi2 < 24.32
    assert np.all(counts > 0)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    net = Mlp([3, 5, 2], rng=rng)
    adam = Adam(net.parameters(), lr=1e-3)
    adam.step(net.parameters(), [rng.normal(size=p.shape)
                                 for p in net.parameters()])
    tensors = mlp_tensors(net, "net")
    tensors.update(adam.state_tensors("adam"))
    meta = {"phase": "test", "episode": 1}
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, tensors, meta)

    loaded, got_meta = load_checkpoint(path)
    assert got_meta == meta
    net2 = Mlp([3, 5, 2])
    load_mlp_tensors(net2, "net", loaded)
    for a, b in zip(net.parameters(), net2.parameters()):
        assert np.array_equal(a, b)
    adam2 = Adam(net2.parameters(), lr=1e-3)
    adam2.load_state_tensors("adam", loaded)
    assert adam2.step_count == adam.step_count
    for a, b in zip(adam.m + adam.v, adam2.m + adam2.v):
        assert np.array_equal(a, b)


def test_checkpoint_file_bytes_deterministic(tmp_path):
    net = Mlp([2, 3, 1], rng=np.random.default_rng(1))
    tensors = mlp_tensors(net, "n")
    save_checkpoint(tmp_path / "a.npz", tensors, {"k": 1})
    save_checkpoint(tmp_path / "b.npz", tensors, {"k": 1})
    assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()
