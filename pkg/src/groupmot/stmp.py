"""Cascaded LSTM next-position predictor.

Three LSTM stages with shrinking time windows (8 -> 4 -> 2 steps by default)
and shrinking hidden sizes, followed by two fully connected layers. Stage
``k+1`` reads the trailing hidden states of stage ``k``. The network maps the
last 8 normalized centers of a track to its next normalized center.

Everything here is plain numpy: forward pass, backpropagation through time,
Adam with cosine-annealed learning rate, and a small ``.npz`` checkpoint
format (see :func:`save`).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from groupmot.errors import DivergedLoss, WindowTooShort

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "groupmot-cascade"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class CascadeConfig:
    hidden: tuple[int, ...] = (64, 32, 16)
    windows: tuple[int, ...] = (8, 4, 2)
    fc_hidden: int = 32
    input_dim: int = 2

    def __post_init__(self):
        if len(self.hidden) != len(self.windows) or not self.hidden:
            raise ValueError("hidden sizes and windows must have the same non-zero length")
        if any(b > a for a, b in zip(self.windows, self.windows[1:])):
            raise ValueError(f"stage windows must not grow: {self.windows}")
        if min(self.windows) < 1 or min(self.hidden) < 1:
            raise ValueError("windows and hidden sizes must be positive")

    @property
    def history(self) -> int:
        return self.windows[0]


@dataclass
class LstmStageWeights:
    """Gate weights stacked in the order input, forget, cell, output."""

    W_x: np.ndarray  # (4H, D)
    W_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.W_h.shape[1]


@dataclass
class CascadeNet:
    config: CascadeConfig
    stages: list[LstmStageWeights]
    fc1_W: np.ndarray
    fc1_b: np.ndarray
    fc2_W: np.ndarray
    fc2_b: np.ndarray

    def params(self) -> dict[str, np.ndarray]:
        """Name -> array mapping. The arrays are the live weights, not copies."""
        out = {}
        for k, st in enumerate(self.stages):
            out[f"stage{k + 1}.W_x"] = st.W_x
            out[f"stage{k + 1}.W_h"] = st.W_h
            out[f"stage{k + 1}.b"] = st.b
        out["fc1.W"] = self.fc1_W
        out["fc1.b"] = self.fc1_b
        out["fc2.W"] = self.fc2_W
        out["fc2.b"] = self.fc2_b
        return out

    def copy(self) -> "CascadeNet":
        return CascadeNet(
            self.config,
            [LstmStageWeights(s.W_x.copy(), s.W_h.copy(), s.b.copy()) for s in self.stages],
            self.fc1_W.copy(), self.fc1_b.copy(), self.fc2_W.copy(), self.fc2_b.copy(),
        )


def init_net(config: CascadeConfig | None = None, seed: int = 0) -> CascadeNet:
    config = config or CascadeConfig()
    rng = np.random.default_rng(seed)

    def uni(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    stages = []
    d = config.input_dim
    for H in config.hidden:
        b = uni(4 * H, H)
        b[H:2 * H] += 1.0
        stages.append(LstmStageWeights(uni((4 * H, d), d), uni((4 * H, H), H), b))
        d = H
    F = config.fc_hidden
    return CascadeNet(config, stages,
                      uni((F, d), d), uni(F, d),
                      uni((2, F), F), uni(2, F))


def zero_net(config: CascadeConfig | None = None) -> CascadeNet:
    net = init_net(config)
    for arr in net.params().values():
        arr[...] = 0.0
    return net


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_cell(x, h, c, w: LstmStageWeights):
    """One LSTM step. Works on single vectors or on ``(B, D)`` batches."""
    H = w.hidden
    z = x @ w.W_x.T + h @ w.W_h.T + w.b
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = _sigmoid(z[..., 3 * H:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def _run_stage(w: LstmStageWeights, xs: np.ndarray):
    """Run a stage over ``xs`` of shape ``(T, B, D)``; keep what backward needs."""
    T, B, _ = xs.shape
    H = w.hidden
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    # input projections for every step in one product
    zx = xs @ w.W_x.T + w.b
    hs, cache = [], []
    for t in range(T):
        z = zx[t] + h @ w.W_h.T
        act = _sigmoid(z)
        i, f, o = act[:, :H], act[:, H:2 * H], act[:, 3 * H:]
        g = np.tanh(z[:, 2 * H:3 * H])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        cache.append((h, c, i, f, g, o, tc))
        h, c = o * tc, c_new
        hs.append(h)
    return np.stack(hs), (xs, cache)


def _backprop_stage(w: LstmStageWeights, cache, dhs: np.ndarray):
    """Backward through one stage. ``dhs`` is the loss gradient w.r.t. each output h."""
    xs, steps = cache
    T = len(steps)
    H = w.hidden
    B = dhs.shape[1]
    dz_all = np.empty((T, B, 4 * H))
    h_prev_all = np.empty((T, B, H))
    dh_next = np.zeros_like(dhs[0])
    dc_next = np.zeros_like(dhs[0])
    for t in reversed(range(T)):
        h_prev, c_prev, i, f, g, o, tc = steps[t]
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
        h_prev_all[t] = h_prev
        dh_next = dz @ w.W_h
        dc_next = dc * f
    flat = dz_all.reshape(T * B, 4 * H)
    dW_x = flat.T @ xs.reshape(T * B, -1)
    dW_h = flat.T @ h_prev_all.reshape(T * B, H)
    db = flat.sum(axis=0)
    dxs = dz_all @ w.W_x
    return dxs, (dW_x, dW_h, db)


def _forward_batch(net: CascadeNet, X: np.ndarray):
    """``X``: ``(B, T, 2)`` windows -> ``(B, 2)`` predictions plus cache."""
    xs = np.transpose(X, (1, 0, 2))
    caches = []
    for st, win in zip(net.stages, net.config.windows):
        xs = xs[-win:]
        hs, cache = _run_stage(st, xs)
        caches.append((cache, win))
        xs = hs
    last = xs[-1]
    pre = last @ net.fc1_W.T + net.fc1_b
    act = np.maximum(pre, 0.0)
    out = act @ net.fc2_W.T + net.fc2_b
    return out, (caches, last, pre, act, X.shape[1])


def _backward_batch(net: CascadeNet, cache, d_out: np.ndarray) -> dict[str, np.ndarray]:
    caches, last, pre, act, T_in = cache
    grads = {}
    grads["fc2.W"] = d_out.T @ act
    grads["fc2.b"] = d_out.sum(axis=0)
    d_act = d_out @ net.fc2_W
    d_pre = d_act * (pre > 0)
    grads["fc1.W"] = d_pre.T @ last
    grads["fc1.b"] = d_pre.sum(axis=0)
    d_last = d_pre @ net.fc1_W
    # gradient flows into the final hidden state of the last stage only
    n_stages = len(net.stages)
    win_out = caches[-1][1]
    dhs = np.zeros((win_out,) + d_last.shape)
    dhs[-1] = d_last
    for k in reversed(range(n_stages)):
        st_cache, win = caches[k]
        dxs, (dW_x, dW_h, db) = _backprop_stage(net.stages[k], st_cache, dhs)
        grads[f"stage{k + 1}.W_x"] = dW_x
        grads[f"stage{k + 1}.W_h"] = dW_h
        grads[f"stage{k + 1}.b"] = db
        if k > 0:
            prev_len = caches[k - 1][1]
            dprev = np.zeros((prev_len,) + dxs.shape[1:])
            dprev[-win:] = dxs
            dhs = dprev
    return grads


def forward(net: CascadeNet, window) -> np.ndarray:
    """Predict the next normalized position from a ``(T, 2)`` window."""
    window = np.asarray(window, dtype=float)
    need = net.config.history
    if window.ndim != 2 or window.shape[0] < need:
        raise WindowTooShort(f"need {need} positions, got {window.shape[0] if window.ndim == 2 else 0}")
    out, _ = _forward_batch(net, window[None, -need:, :])
    return out[0]


def forward_batch(net: CascadeNet, windows) -> np.ndarray:
    windows = np.asarray(windows, dtype=float)
    if windows.shape[1] < net.config.history:
        raise WindowTooShort(f"need {net.config.history} positions")
    return _forward_batch(net, windows[:, -net.config.history:, :])[0]


def mse_loss(pred, label) -> float:
    pred = np.asarray(pred, dtype=float).reshape(-1, 2)
    label = np.asarray(label, dtype=float).reshape(-1, 2)
    if pred.shape != label.shape:
        raise ValueError(f"batch size mismatch {pred.shape} vs {label.shape}")
    return float(np.mean(np.sum((pred - label) ** 2, axis=1)))


def loss_and_grads(net: CascadeNet, X, Y) -> tuple[float, dict[str, np.ndarray]]:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out, cache = _forward_batch(net, X)
    diff = out - Y
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    grads = _backward_batch(net, cache, 2.0 * diff / len(X))
    return loss, grads


class TrainSample(NamedTuple):
    input: np.ndarray  # (8, 2) normalized
    label: np.ndarray  # (2,) normalized
    sequence_id: int
    start_frame: int


def normalize(points, meta) -> np.ndarray:
    return np.asarray(points, dtype=float) / np.array([meta.image_width, meta.image_height])


def denormalize(points, meta) -> np.ndarray:
    return np.asarray(points, dtype=float) * np.array([meta.image_width, meta.image_height])


def extract_windows(trajectories: Mapping[int, Iterable[tuple[int, float, float]]], meta,
                    history: int = 8) -> list[TrainSample]:
    """Cut every gap-free run into sliding ``history + 1`` frame samples.

    ``trajectories`` maps an id to ``(frame, x_center, y_center)`` records.
    """
    samples = []
    span = history + 1
    for tid in sorted(trajectories):
        recs = sorted(trajectories[tid])
        if len(recs) < span:
            continue
        frames = np.array([r[0] for r in recs])
        pts = normalize([(r[1], r[2]) for r in recs], meta)
        breaks = np.flatnonzero(np.diff(frames) != 1) + 1
        for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, len(recs)]):
            for s in range(lo, hi - span + 1):
                samples.append(TrainSample(pts[s:s + history], pts[s + history], int(tid), int(frames[s])))
    return samples


@dataclass
class TrainResult:
    net: CascadeNet
    losses: list[float] = field(default_factory=list)


def cosine_lr(lr0: float, epoch: int, epochs: int) -> float:
    return lr0 * (1.0 + math.cos(math.pi * epoch / epochs)) / 2.0


def train(net: CascadeNet, samples: Sequence[TrainSample], epochs: int = 100, lr0: float = 0.01,
          batch_size: int = 64, seed: int = 0, betas=(0.9, 0.999), eps: float = 1e-8) -> TrainResult:
    """Adam with per-epoch cosine annealing; returns a trained copy and epoch losses."""
    if not samples:
        raise ValueError("no training samples")
    net = net.copy()
    X = np.stack([s.input for s in samples])
    Y = np.stack([s.label for s in samples])
    rng = np.random.default_rng(seed)
    params = net.params()
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    b1, b2 = betas
    step = 0
    result = TrainResult(net)
    for epoch in range(epochs):
        lr = cosine_lr(lr0, epoch, epochs)
        order = rng.permutation(len(X))
        total = 0.0
        for lo in range(0, len(order), batch_size):
            idx = order[lo:lo + batch_size]
            loss, grads = loss_and_grads(net, X[idx], Y[idx])
            if not math.isfinite(loss):
                raise DivergedLoss(f"loss became {loss} in epoch {epoch}")
            total += loss * len(idx)
            step += 1
            for k, p in params.items():
                g = grads[k]
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                mhat = m[k] / (1 - b1 ** step)
                vhat = v[k] / (1 - b2 ** step)
                p -= lr * mhat / (np.sqrt(vhat) + eps)
        result.losses.append(total / len(X))
        logger.debug("epoch %d lr %.5f loss %.3e", epoch, lr, result.losses[-1])
    return result


def predict_center(net: CascadeNet, track, meta, frame: int | None = None) -> tuple[float, float]:
    """Next center in pixels for ``track`` from its last consecutive positions.

    ``frame`` is the frame being predicted; history must end at ``frame - 1``.
    Raises WindowTooShort when that many consecutive records are missing.
    """
    need = net.config.history
    if frame is not None:
        end = frame - 1
    else:
        end = track.history[-1].frame if track.history else 0
    window = track.consecutive_positions(end, need)
    if window is None:
        raise WindowTooShort(f"track {track.id} lacks {need} consecutive frames ending at {end}")
    pred = denormalize(forward(net, normalize(window, meta)), meta)
    x = float(np.clip(pred[0], -0.5 * meta.image_width, 1.5 * meta.image_width))
    y = float(np.clip(pred[1], -0.5 * meta.image_height, 1.5 * meta.image_height))
    return (x, y)


def save(net: CascadeNet, path) -> None:
    """Write a checkpoint.

    Layout: a numpy ``.npz`` archive with one float64 array per parameter
    (names from :meth:`CascadeNet.params`) plus ``__header__``, a 0-d string
    array holding JSON ``{"format", "version", "hidden", "windows",
    "fc_hidden", "input_dim"}``.
    """
    cfg = net.config
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hidden": list(cfg.hidden),
        "windows": list(cfg.windows),
        "fc_hidden": cfg.fc_hidden,
        "input_dim": cfg.input_dim,
    }
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in net.params().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load(path) -> CascadeNet:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a cascade checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        cfg = CascadeConfig(tuple(header["hidden"]), tuple(header["windows"]),
                            int(header["fc_hidden"]), int(header["input_dim"]))
        net = zero_net(cfg)
        for name, arr in net.params().items():
            if data[name].shape != arr.shape:
                raise ValueError(f"{path}: {name} has shape {data[name].shape}, expected {arr.shape}")
            arr[...] = data[name]
    return net
