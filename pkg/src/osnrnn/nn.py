"""35-5-5-1 tanh multilayer perceptron regressing nonlinear SNR in dB.

Pure numpy: forward pass, hand-written backpropagation, Adam and a JSON
model format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FEATURE_LAYOUT_ID

MODEL_FORMAT = "osnrnn-mlp"
MODEL_VERSION = 1
DEFAULT_LAYERS = (35, 5, 5, 1)


class ModelFormatError(ValueError):
    pass


@dataclass
class ModelWeights:
    layers: tuple[int, ...]
    weights: list[np.ndarray]  # weights[l] has shape (layers[l], layers[l+1])
    biases: list[np.ndarray]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    layout_id: str = FEATURE_LAYOUT_ID
    version: int = MODEL_VERSION

    def __post_init__(self):
        self.layers = tuple(int(v) for v in self.layers)
        self.validate()

    def validate(self):
        n = len(self.layers) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise ModelFormatError("number of weight/bias arrays does not match the layer list")
        for i in range(n):
            if np.shape(self.weights[i]) != (self.layers[i], self.layers[i + 1]):
                raise ModelFormatError(f"weight matrix {i} has shape {np.shape(self.weights[i])}")
            if np.shape(self.biases[i]) != (self.layers[i + 1],):
                raise ModelFormatError(f"bias vector {i} has shape {np.shape(self.biases[i])}")
        if np.shape(self.feature_mean) != (self.layers[0],) or np.shape(self.feature_std) != (self.layers[0],):
            raise ModelFormatError("standardisation vectors do not match the input size")
        if not np.all(np.asarray(self.feature_std) > 0):
            raise ModelFormatError("standardisation std must be positive")

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.layers, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                            self.feature_mean.copy(), self.feature_std.copy(), self.layout_id, self.version)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 3000
    patience: int = 20
    validation_fraction: float = 0.15
    seed: int = 0
    weight_decay: float = 0.0
    layers: tuple[int, ...] = DEFAULT_LAYERS

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.batch_size > 0 and self.max_epochs > 0 and self.patience > 0):
            raise ValueError("training hyper-parameters must be positive")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")

    @classmethod
    def from_config(cls, cfg: dict) -> "TrainConfig":
        n = cfg["nn"]
        return cls(float(n["learning_rate"]), int(n["batch_size"]), int(n["max_epochs"]), int(n["patience"]),
                   float(n["validation_fraction"]), int(n["seed"]), float(n.get("weight_decay", 0.0)),
                   tuple(n.get("layers", DEFAULT_LAYERS)))


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    train_indices: list[int] = field(default_factory=list)
    val_indices: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


def init(seed, layout=DEFAULT_LAYERS) -> ModelWeights:
    """Glorot-uniform weights, zero biases, identity standardisation."""
    layout = tuple(int(v) for v in layout)
    if layout != DEFAULT_LAYERS:
        raise ValueError(f"layout must be {DEFAULT_LAYERS}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layout[:-1], layout[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelWeights(layout, weights, biases, np.zeros(layout[0]), np.ones(layout[0]))


def _as_matrix(f) -> np.ndarray:
    values = getattr(f, "values", f)
    return np.atleast_2d(np.asarray(values, dtype=float))


def _check_layout(w: ModelWeights, f):
    layout = getattr(f, "layout_id", None)
    if layout is not None and layout != w.layout_id:
        raise ValueError(f"feature layout {layout!r} does not match model layout {w.layout_id!r}")


def _forward_std(weights, biases, x):
    acts = [x]
    a = x
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        a = z if i == len(weights) - 1 else np.tanh(z)
        acts.append(a)
    return acts


def forward(w: ModelWeights, f) -> float | np.ndarray:
    """Predicted nonlinear SNR in dB for one feature vector or a batch."""
    _check_layout(w, f)
    x = _as_matrix(f)
    if x.shape[1] != w.layers[0]:
        raise ValueError(f"expected {w.layers[0]} input features, got {x.shape[1]}")
    out = _forward_std(w.weights, w.biases, (x - w.feature_mean) / w.feature_std)[-1][:, 0]
    return float(out[0]) if np.ndim(getattr(f, "values", f)) == 1 else out


def loss_and_grads(weights, biases, x, t, weight_decay: float = 0.0):
    """Mean squared error and its gradients for standardised inputs ``x``."""
    acts = _forward_std(weights, biases, x)
    y = acts[-1][:, 0]
    r = y - t
    loss = float(np.mean(r**2))
    if weight_decay:
        loss += weight_decay * sum(float(np.sum(W**2)) for W in weights)
    grad_w, grad_b = [None] * len(weights), [None] * len(weights)
    delta = (2.0 / len(t)) * r[:, None]
    for i in range(len(weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta + 2 * weight_decay * weights[i]
        grad_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * (1 - acts[i] ** 2)
    return loss, grad_w, grad_b


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1, c2 = 1 - self.b1**self.t, 1 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def fit_standardization(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[int]]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    degenerate = [i for i, s in enumerate(std) if not s > 1e-12 * max(1.0, abs(mean[i]))]
    std = std.copy()
    std[degenerate] = 1.0
    return mean, std, degenerate


def train(features, targets, cfg: TrainConfig = TrainConfig(), layout_id: str = FEATURE_LAYOUT_ID):
    """Train on ``features`` (n, 35) against SNR_NL targets in dB.

    A seed-derived permutation holds out ``validation_fraction`` of the
    records for early stopping; validation loss never feeds a gradient. The
    best-validation weights are returned with the target scaling folded into
    the output layer.
    """
    x = _as_matrix(features)
    t = np.asarray(targets, dtype=float)
    if len(t) < 10 or x.shape[0] != len(t):
        raise ValueError("need at least 10 records with one target each")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(x)):
        raise ValueError("features and targets must be finite")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(t))
    n_val = max(1, int(round(cfg.validation_fraction * len(t))))
    val_idx, tr_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    hist = TrainHistory(train_indices=tr_idx.tolist(), val_indices=val_idx.tolist())

    mean, std, degenerate = fit_standardization(x[tr_idx])
    for i in degenerate:
        hist.warnings.append(f"feature {i} has zero variance on the training split; std clamped to 1")
    xs = (x - mean) / std
    t_mean, t_std = float(t[tr_idx].mean()), float(t[tr_idx].std()) or 1.0
    ts = (t - t_mean) / t_std

    model = init(rng, cfg.layers)
    weights, biases = model.weights, model.biases
    opt = _Adam(weights + biases, cfg.learning_rate)
    best = (math.inf, [w.copy() for w in weights], [b.copy() for b in biases])
    since_best = 0
    x_tr, t_tr = xs[tr_idx], ts[tr_idx]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(tr_idx))
        for start in range(0, len(order), cfg.batch_size):
            b = order[start:start + cfg.batch_size]
            _, gw, gb = loss_and_grads(weights, biases, x_tr[b], t_tr[b], cfg.weight_decay)
            opt.step(weights + biases, gw + gb)
        tr_loss = float(np.mean((_forward_std(weights, biases, x_tr)[-1][:, 0] - t_tr) ** 2))
        va_loss = float(np.mean((_forward_std(weights, biases, xs[val_idx])[-1][:, 0] - ts[val_idx]) ** 2))
        hist.train_loss.append(tr_loss * t_std**2)
        hist.val_loss.append(va_loss * t_std**2)
        if va_loss < best[0]:
            best = (va_loss, [w.copy() for w in weights], [b.copy() for b in biases])
            hist.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    weights, biases = best[1], best[2]
    weights[-1] = weights[-1] * t_std
    biases[-1] = biases[-1] * t_std + t_mean
    return ModelWeights(cfg.layers, weights, biases, mean, std, layout_id), hist


# --------------------------------------------------------------- persistence
def to_dict(w: ModelWeights) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": w.version,
        "layers": list(w.layers),
        "feature_layout_id": w.layout_id,
        "standardization": {"mean": w.feature_mean.tolist(), "std": w.feature_std.tolist()},
        "weights": [W.tolist() for W in w.weights],
        "biases": [b.tolist() for b in w.biases],
    }


def from_dict(d: dict, expected_layout_id: str | None = FEATURE_LAYOUT_ID) -> ModelWeights:
    if d.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not an osnrnn model file")
    if d.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
    if tuple(d.get("layers", ())) != DEFAULT_LAYERS:
        raise ModelFormatError(f"unsupported layer layout {d.get('layers')!r}")
    layout = d.get("feature_layout_id")
    if expected_layout_id is not None and layout != expected_layout_id:
        raise ModelFormatError(f"feature layout {layout!r} does not match {expected_layout_id!r}")
    try:
        st = d["standardization"]
        return ModelWeights(
            tuple(d["layers"]),
            [np.asarray(W, dtype=float) for W in d["weights"]],
            [np.asarray(b, dtype=float) for b in d["biases"]],
            np.asarray(st["mean"], dtype=float), np.asarray(st["std"], dtype=float),
            layout, int(d["version"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def save(w: ModelWeights, path) -> None:
    Path(path).write_text(json.dumps(to_dict(w), indent=1) + "\n", encoding="utf-8")


def load(path, expected_layout_id: str | None = FEATURE_LAYOUT_ID) -> ModelWeights:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    return from_dict(d, expected_layout_id)
