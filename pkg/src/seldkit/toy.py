"""A two-layer reference model with the 156-neuron linear multi-ACCDOA head.

Feature frames are mean-pooled 5 -> 1 to the 100 ms label rate; each pooled
frame (7 x 64 = 448 values) goes through ``tanh`` hidden units and a linear
output reshaped to ``(3 tracks, 13 classes, 4)``. Gradients are computed by
hand and the model is trained full-batch through :func:`adpit_loss_grad`.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .adpit import adpit_loss_grad
from .augment import make_rng
from .core import FRAMES_PER_LABEL, N_CLASSES, N_FEATURE_CHANNELS, N_MELS, N_TRACKS, OUTPUT_NEURONS
from .errors import DomainError, FormatError, TrainingError
from .features import FeatureTensor
from .io import atomic_write_bytes

log = logging.getLogger(__name__)

INPUT_DIM = N_FEATURE_CHANNELS * N_MELS
PARAM_NAMES = ("W1", "b1", "W2", "b2")
_MAGIC = b"SELDTOY1"


@dataclass
class ToyModel:
    W1: np.ndarray  # (H, 448)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (156, H)
    b2: np.ndarray  # (156,)
    seed: int = 0
    epoch: int = 0

    @property
    def hidden(self):
        return self.W1.shape[0]

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self):
        return replace(self, W1=self.W1.copy(), b1=self.b1.copy(),
                       W2=self.W2.copy(), b2=self.b2.copy())


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    seed: int = 0
    dist_weight: float = 1.0
    optimizer: str = "sgd"  # or "adam"
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.lr >= 0:
            raise DomainError(f"learning rate must be non-negative, got {self.lr}")
        if self.optimizer not in ("sgd", "adam"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")


def init_model(h=128, seed=0):
    """Glorot-uniform weights, zero biases."""
    if h < 1:
        raise DomainError(f"hidden width must be >= 1, got {h}")
    rng = make_rng(seed)

    def glorot(fan_out, fan_in):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(fan_out, fan_in))

    W1 = glorot(h, INPUT_DIM)
    W2 = glorot(OUTPUT_NEURONS, h)
    return ToyModel(W1, np.zeros(h), W2, np.zeros(OUTPUT_NEURONS), seed=seed)


def pool_frames(x):
    """Mean-pool (7, T, 64) features to (T // 5, 448) label-rate inputs."""
    v = np.asarray(x.values if isinstance(x, FeatureTensor) else x, dtype=np.float64)
    if v.ndim != 3 or v.shape[0] != N_FEATURE_CHANNELS or v.shape[2] != N_MELS:
        raise DomainError(f"features must be (7, T, 64), got {v.shape}")
    n_label = v.shape[1] // FRAMES_PER_LABEL
    v = v[:, :n_label * FRAMES_PER_LABEL].reshape(N_FEATURE_CHANNELS, n_label, FRAMES_PER_LABEL, N_MELS)
    return v.mean(axis=2).transpose(1, 0, 2).reshape(n_label, INPUT_DIM)


def _forward(m, inputs):
    z1 = inputs @ m.W1.T + m.b1
    h = np.tanh(z1)
    out = h @ m.W2.T + m.b2
    pred = out.reshape(-1, N_TRACKS, N_CLASSES, 4).transpose(1, 2, 3, 0)
    return pred, h


def forward(m, x):
    """Prediction tensor (3, 13, 4, T // 5); the trailing partial label frame is dropped."""
    return _forward(m, pool_frames(x))[0]


def _backward(m, inputs, h, dpred):
    d_out = dpred.transpose(3, 0, 1, 2).reshape(-1, OUTPUT_NEURONS)
    dW2 = d_out.T @ h
    db2 = d_out.sum(axis=0)
    dz1 = (d_out @ m.W2) * (1.0 - h * h)
    dW1 = dz1.T @ inputs
    db1 = dz1.sum(axis=0)
    return [dW1, db1, dW2, db2]


def loss_and_grads(m, data, dist_weight=1.0):
    """Mean ADPIT loss over ``data = [(inputs, sets), ...]`` and its parameter gradients."""
    total = 0.0
    grads = [np.zeros_like(p) for p in m.params()]
    for inputs, sets in data:
        pred, h = _forward(m, inputs)
        res = adpit_loss_grad(pred, sets, dist_weight)
        total += res.value
        for g, d in zip(grads, _backward(m, inputs, h, res.gradient)):
            g += d
    k = len(data)
    return total / k, [g / k for g in grads]


def _prepare(features, sets_list):
    if len(features) != len(sets_list) or not features:
        raise DomainError("need matching, non-empty lists of features and targets")
    data = []
    for x, sets in zip(features, sets_list):
        inputs = pool_frames(x)
        if sets.n_frames != len(inputs):
            raise DomainError(f"features give {len(inputs)} label frames, targets have {sets.n_frames}")
        data.append((inputs, sets))
    return data


def train(m, features, sets_list, cfg):
    """Full-batch training; returns ``(model, loss_curve)``.

    ``loss_curve[e]`` is the loss before the update of epoch ``e``. The input
    model is not modified.
    """
    data = _prepare(features, sets_list)
    m = m.copy()
    curve = []
    if cfg.optimizer == "adam":
        mom = [np.zeros_like(p) for p in m.params()]
        vel = [np.zeros_like(p) for p in m.params()]
        b1, b2 = cfg.betas
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grads(m, data, cfg.dist_weight)
        if not np.isfinite(loss):
            raise TrainingError(f"loss became {loss} at epoch {epoch}", epoch=epoch)
        curve.append(loss)
        if cfg.optimizer == "sgd":
            for p, g in zip(m.params(), grads):
                p -= cfg.lr * g
        else:
            step = epoch + 1
            for p, g, mo, ve in zip(m.params(), grads, mom, vel):
                mo *= b1
                mo += (1.0 - b1) * g
                ve *= b2
                ve += (1.0 - b2) * g * g
                m_hat = mo / (1.0 - b1 ** step)
                v_hat = ve / (1.0 - b2 ** step)
                p -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        m.epoch += 1
        if epoch % 100 == 0:
            log.debug("epoch %d loss %.6g", epoch, loss)
    return m, np.array(curve)


# ---------------------------------------------------------------- checkpoints


def save_model(m, path):
    """JSON header (dims, seed, epoch) followed by float32 LE parameters."""
    header = {"input_dim": INPUT_DIM, "hidden": m.hidden, "output_dim": OUTPUT_NEURONS,
              "seed": int(m.seed), "epoch": int(m.epoch), "params": list(PARAM_NAMES)}
    head = json.dumps(header).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in m.params())
    atomic_write_bytes(path, _MAGIC + struct.pack("<I", len(head)) + head + payload)


def load_model(path):
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC or len(raw) < 12:
        raise FormatError(f"{path}: not a toy model checkpoint (bad magic)")
    (n,) = struct.unpack("<I", raw[8:12])
    try:
        header = json.loads(raw[12:12 + n].decode("utf-8"))
        h = int(header["hidden"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: bad checkpoint header ({exc})") from None
    if header.get("input_dim") != INPUT_DIM or header.get("output_dim") != OUTPUT_NEURONS:
        raise FormatError(f"{path}: checkpoint dims do not match a 448 -> H -> 156 model")
    shapes = [(h, INPUT_DIM), (h,), (OUTPUT_NEURONS, h), (OUTPUT_NEURONS,)]
    need = 4 * sum(int(np.prod(s)) for s in shapes)
    body = raw[12 + n:]
    if len(body) != need:
        raise FormatError(f"{path}: parameter payload is {len(body)} bytes, expected {need}")
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64)
    params, off = [], 0
    for s in shapes:
        k = int(np.prod(s))
        params.append(flat[off:off + k].reshape(s).copy())
        off += k
    return ToyModel(*params, seed=int(header.get("seed", 0)), epoch=int(header.get("epoch", 0)))
