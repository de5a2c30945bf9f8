import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groupmot import stmp
from groupmot.errors import DivergedLoss, WindowTooShort
from groupmot.model import SequenceMeta, Track

SMALL = stmp.CascadeConfig(hidden=(8, 8, 8), windows=(8, 4, 2), fc_hidden=8)


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def scalar_cell(x, h, c, w):
    """Element-by-element LSTM step written without matrix products."""
    H = len(h)
    z = []
    for r in range(4 * H):
        acc = w.b[r]
        for k in range(len(x)):
            acc += w.W_x[r, k] * x[k]
        for k in range(H):
            acc += w.W_h[r, k] * h[k]
        z.append(acc)
    h_new, c_new = [], []
    for k in range(H):
        i, f = sigmoid(z[k]), sigmoid(z[H + k])
        g, o = math.tanh(z[2 * H + k]), sigmoid(z[3 * H + k])
        c_k = f * c[k] + i * g
        c_new.append(c_k)
        h_new.append(o * math.tanh(c_k))
    return np.array(h_new), np.array(c_new)


def test_lstm_cell_zero_weights():
    w = stmp.zero_net(SMALL).stages[0]
    h, c = stmp.lstm_cell(np.ones(2), np.zeros(8), np.zeros(8), w)
    assert not h.any() and not c.any()


@pytest.mark.parametrize("seed", range(5))
def test_lstm_cell_matches_scalar_reference(seed):
    rng = np.random.default_rng(seed)
    w = stmp.init_net(SMALL, seed=seed).stages[1]
    x, h, c = rng.normal(size=8), rng.normal(size=8), rng.normal(size=8)
    got = stmp.lstm_cell(x, h, c, w)
    ref = scalar_cell(x, h, c, w)
    assert np.allclose(got[0], ref[0], atol=1e-12)
    assert np.allclose(got[1], ref[1], atol=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.floats(0.1, 20))
def test_cell_state_bound(seed, scale):
    rng = np.random.default_rng(seed)
    w = stmp.init_net(SMALL, seed=seed).stages[0]
    c = rng.normal(size=8) * scale
    _, c_new = stmp.lstm_cell(rng.normal(size=2) * scale, rng.normal(size=8), c, w)
    assert np.all(np.abs(c_new) <= np.abs(c) + 1 + 1e-12)


def test_zero_net_outputs_bias():
    net = stmp.zero_net()
    net.fc2_b[:] = [0.25, -0.5]
    out = stmp.forward(net, np.random.default_rng(0).random((8, 2)))
    assert out.shape == (2,)
    assert out.tolist() == [0.25, -0.5]


def test_forward_requires_full_window():
    net = stmp.init_net(SMALL)
    with pytest.raises(WindowTooShort):
        stmp.forward(net, np.zeros((7, 2)))


def test_forward_batch_order_invariant():
    net = stmp.init_net(SMALL, seed=2)
    X = np.random.default_rng(1).random((6, 8, 2))
    perm = np.array([3, 0, 5, 1, 4, 2])
    a = stmp.forward_batch(net, X)
    b = stmp.forward_batch(net, X[perm])
    assert np.allclose(a[perm], b, atol=1e-14)
    assert np.allclose(a[0], stmp.forward(net, X[0]), atol=1e-14)


def test_mse_fixtures():
    assert stmp.mse_loss([[1, 2]], [[1, 2]]) == 0
    assert stmp.mse_loss([[0, 0]], [[3, 4]]) == 25
    p = np.random.default_rng(0).random((5, 2))
    y = np.random.default_rng(1).random((5, 2))
    assert stmp.mse_loss(np.vstack([p, p]), np.vstack([y, y])) == pytest.approx(stmp.mse_loss(p, y))
    with pytest.raises(ValueError):
        stmp.mse_loss(np.zeros((2, 2)), np.zeros((3, 2)))


def test_gradients_match_finite_differences():
    net = stmp.init_net(SMALL, seed=4)
    rng = np.random.default_rng(4)
    X, Y = rng.random((4, 8, 2)), rng.random((4, 2))
    _, grads = stmp.loss_and_grads(net, X, Y)
    eps = 1e-5
    for name, arr in net.params().items():
        fd = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            lp, _ = stmp.loss_and_grads(net, X, Y)
            arr[idx] = old - eps
            lm, _ = stmp.loss_and_grads(net, X, Y)
            arr[idx] = old
            fd[idx] = (lp - lm) / (2 * eps)
        # relative error, with a floor far below any gradient that matters
        assert np.all(np.abs(grads[name] - fd) <= 1e-4 * np.maximum(np.abs(grads[name]), np.abs(fd)) + 1e-9), name


def meta(w=1000, h=1000):
    return SequenceMeta(w, h, 100)


def test_extract_windows_counts():
    m = meta()
    assert len(stmp.extract_windows({1: [(f, f, f) for f in range(1, 10)]}, m)) == 1
    assert len(stmp.extract_windows({1: [(f, f, f) for f in range(1, 13)]}, m)) == 4
    assert stmp.extract_windows({1: [(f, f, f) for f in range(1, 9)]}, m) == []


def test_extract_windows_never_span_gaps():
    recs = [(f, f, 0) for f in range(1, 21) if f != 5]
    samples = stmp.extract_windows({3: recs}, meta())
    assert len(samples) == 7  # frames 6..20 only
    for s in samples:
        assert s.start_frame >= 6 and s.sequence_id == 3
        xs = s.input[:, 0] * 1000
        assert np.allclose(np.diff(xs), 1)
        assert s.label[0] * 1000 == pytest.approx(xs[-1] + 1)


@given(st.lists(st.tuples(st.floats(0, 1920), st.floats(0, 1080)), min_size=1, max_size=10))
def test_normalize_round_trip(pts):
    m = SequenceMeta(1920, 1080, 10)
    back = stmp.denormalize(stmp.normalize(pts, m), m)
    assert np.allclose(back, pts, atol=1e-9)


def test_cosine_schedule():
    assert stmp.cosine_lr(0.01, 0, 100) == 0.01
    assert stmp.cosine_lr(0.01, 50, 100) == pytest.approx(0.005)
    assert stmp.cosine_lr(0.01, 99, 100) > 0


def toy_samples(seed, n=128):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 8, 2))
    Y = 0.5 * X[:, -1, :] + 0.25
    return [stmp.TrainSample(X[i], Y[i], i, 1) for i in range(n)]


def test_training_is_deterministic():
    a = stmp.train(stmp.init_net(SMALL, seed=1), toy_samples(0), epochs=3, seed=5)
    b = stmp.train(stmp.init_net(SMALL, seed=1), toy_samples(0), epochs=3, seed=5)
    for k, v in a.net.params().items():
        assert np.array_equal(v, b.net.params()[k])
    assert a.losses == b.losses
    assert all(math.isfinite(v) for v in a.losses)


def test_training_does_not_touch_input_net():
    net = stmp.init_net(SMALL, seed=1)
    before = net.copy()
    stmp.train(net, toy_samples(0), epochs=1)
    assert all(np.array_equal(v, before.params()[k]) for k, v in net.params().items())


def test_loss_non_increasing_smoke():
    monotone = 0
    for seed in range(10):
        res = stmp.train(stmp.init_net(SMALL, seed=seed), toy_samples(seed), epochs=20, lr0=0.002, seed=seed)
        monotone += all(b <= a for a, b in zip(res.losses, res.losses[1:]))
    assert monotone >= 9


def test_diverged_loss():
    bad = [stmp.TrainSample(np.zeros((8, 2)), np.array([np.nan, 0.0]), 1, 1)]
    with pytest.raises(DivergedLoss):
        stmp.train(stmp.init_net(SMALL), bad, epochs=1)
    with pytest.raises(ValueError):
        stmp.train(stmp.init_net(SMALL), [], epochs=1)


def test_checkpoint_round_trip(tmp_path):
    net = stmp.init_net(SMALL, seed=9)
    path = tmp_path / "net.npz"
    stmp.save(net, path)
    back = stmp.load(path)
    assert back.config == SMALL
    for k, v in net.params().items():
        assert np.array_equal(v, back.params()[k])


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, __header__=np.array('{"format": "other", "version": 1}'))
    with pytest.raises(ValueError):
        stmp.load(path)


def make_track(frames, pos=lambda f: (f, 2 * f)):
    t = Track(1, 1, None)
    for f in frames:
        t.record(f, pos(f), (1, 2))
    return t


def test_predict_center_window_rules():
    net = stmp.init_net()
    m = meta()
    with pytest.raises(WindowTooShort):
        stmp.predict_center(net, make_track(range(1, 8)), m, 8)
    with pytest.raises(WindowTooShort):
        stmp.predict_center(net, make_track(range(1, 9)), m, 10)
    x, y = stmp.predict_center(net, make_track(range(1, 9)), m, 9)
    assert math.isfinite(x) and math.isfinite(y)


def test_predict_center_is_clamped():
    net = stmp.zero_net()
    net.fc2_b[:] = [10.0, -10.0]
    x, y = stmp.predict_center(net, make_track(range(1, 9)), SequenceMeta(100, 50, 10), 9)
    assert (x, y) == (150.0, -25.0)


def test_config_validation():
    with pytest.raises(ValueError):
        stmp.CascadeConfig(hidden=(8, 8), windows=(8, 4, 2))
    with pytest.raises(ValueError):
        stmp.CascadeConfig(windows=(4, 8, 2))
