"""Feed-forward network for sound event classification, trained with plain SGD.

Architecture: input -> 800 -> 500 -> 200 -> n_classes, tanh on every hidden
layer, softmax output trained against mean categorical cross-entropy. No
momentum, weight decay, or early stopping; minibatches are reshuffled each
epoch from the run seed, so training is bit-reproducible for a fixed seed
(single-threaded reduction order; BLAS threading does not change results for
a fixed build).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
DEFAULT_HIDDEN_SIZES = (800, 500, 200)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.008
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    init: str = "glorot_uniform"
    dtype: str = "float32"  # training precision; float32 is ~2x faster here

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise DataError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.init != "glorot_uniform":
            raise DataError(f"unknown init scheme {self.init!r}")
        if self.dtype not in ("float32", "float64"):
            raise DataError(f"dtype must be float32 or float64, got {self.dtype!r}")


@dataclass
class MlpModel:
    weights: list[np.ndarray]  # weights[i]: (layer_sizes[i], layer_sizes[i+1])
    biases: list[np.ndarray]
    classes: np.ndarray
    config: TrainConfig

    def __post_init__(self) -> None:
        for i in range(len(self.weights) - 1):
            if self.weights[i].shape[1] != self.weights[i + 1].shape[0]:
                raise DataError("consecutive layer dimensions do not chain")
        for W, b in zip(self.weights, self.biases):
            if W.shape[1] != b.shape[0]:
                raise DataError("bias shape does not match layer width")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise NumericError("MLP model has non-finite parameters")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]


@dataclass
class TrainHistory:
    epoch_loss: list[float] = field(default_factory=list)


def init_mlp(
    dim: int,
    n_classes: int,
    cfg: TrainConfig,
    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN_SIZES,
    dtype=np.float64,
) -> tuple[list[np.ndarray], list[np.ndarray], np.random.Generator]:
    """Glorot-uniform weights and zero biases from the run seed."""
    rng = np.random.default_rng(cfg.seed)
    sizes = [dim, *hidden_sizes, n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return weights, biases, rng


def _forward(
    weights: list[np.ndarray], biases: list[np.ndarray], X: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns (hidden activations incl. input, output log-probabilities)."""
    acts = [X]
    a = X
    for W, b in zip(weights[:-1], biases[:-1]):
        a = np.tanh(a @ W + b)
        acts.append(a)
    z = a @ weights[-1] + biases[-1]
    logp = z - _logsumexp(z)
    return acts, logp


def _logsumexp(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    return m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))


def forward(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, one row per input."""
    X = np.asarray(X, dtype=model.weights[0].dtype)
    if X.shape[1] != model.weights[0].shape[0]:
        raise DataError(
            f"model expects {model.weights[0].shape[0]}-dim inputs, got {X.shape[1]}-dim"
        )
    _, logp = _forward(model.weights, model.biases, X)
    return np.exp(logp)


def _loss_from_logp(logp: np.ndarray, label_idx: np.ndarray) -> float:
    return float(-logp[np.arange(len(label_idx)), label_idx].mean())


def mlp_backward(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    X: np.ndarray,
    label_idx: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Analytic gradients of the mean cross-entropy over the batch.

    Returns (weight grads, bias grads, batch loss).
    """
    acts, logp = _forward(weights, biases, X)
    probs = np.exp(logp)
    n = X.shape[0]
    delta = probs.copy()
    delta[np.arange(n), label_idx] -= 1.0
    delta /= n
    w_grads: list[np.ndarray] = [np.empty(0)] * len(weights)
    b_grads: list[np.ndarray] = [np.empty(0)] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        w_grads[layer] = acts[layer].T @ delta
        b_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (1.0 - acts[layer] ** 2)
    return w_grads, b_grads, _loss_from_logp(logp, label_idx)


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig | None = None,
    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN_SIZES,
) -> tuple[MlpModel, TrainHistory]:
    """Minibatch SGD for ``cfg.epochs``; per-epoch mean loss is recorded."""
    cfg = cfg or TrainConfig()
    dtype = np.dtype(cfg.dtype)
    X = np.asarray(X, dtype=dtype)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError("X must be (n, d) with one label per row")
    if X.shape[0] < 2:
        raise DataError("need at least 2 training points")
    if not np.all(np.isfinite(X)):
        raise DataError("training features contain NaN/Inf")
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("training labels contain a single class")
    label_idx = np.searchsorted(classes, y)

    weights, biases, rng = init_mlp(X.shape[1], classes.size, cfg, hidden_sizes, dtype=dtype)
    n = X.shape[0]
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            w_grads, b_grads, loss = mlp_backward(weights, biases, X[batch], label_idx[batch])
            if not np.isfinite(loss):
                raise NumericError(
                    f"NaN loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            for layer in range(len(weights)):
                weights[layer] -= cfg.lr * w_grads[layer]
                biases[layer] -= cfg.lr * b_grads[layer]
            epoch_losses.append(loss)
        history.epoch_loss.append(float(np.mean(epoch_losses)))
        if (epoch + 1) % 25 == 0:
            log.debug("epoch %d: mean loss %.5f", epoch + 1, history.epoch_loss[-1])
    model = MlpModel(weights=weights, biases=biases, classes=classes, config=cfg)
    return model, history


def predict_mlp(model: MlpModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Argmax class probabilities; ties break toward the lowest class index."""
    probs = forward(model, X)
    return model.classes[np.argmax(probs, axis=1)], probs


def save_mlp(path: str | Path, model: MlpModel) -> None:
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "model": "mlp",
        "layer_sizes": model.layer_sizes,
        "lr": model.config.lr,
        "epochs": model.config.epochs,
        "batch_size": model.config.batch_size,
        "seed": model.config.seed,
        "init": model.config.init,
        "dtype": model.config.dtype,
    }
    arrays = {
        "meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        "classes": model.classes,
    }
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i}"] = W
        arrays[f"b{i}"] = b
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_mlp(path: str | Path) -> MlpModel:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("model") != "mlp":
            raise DataError(f"{path}: not an MLP model file")
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format {meta.get('format_version')}")
        n_layers = len(meta["layer_sizes"]) - 1
        cfg = TrainConfig(
            lr=meta["lr"],
            epochs=meta["epochs"],
            batch_size=meta["batch_size"],
            seed=meta["seed"],
            init=meta["init"],
            dtype=meta.get("dtype", "float64"),
        )
        return MlpModel(
            weights=[data[f"W{i}"] for i in range(n_layers)],
            biases=[data[f"b{i}"] for i in range(n_layers)],
            classes=data["classes"],
            config=cfg,
        )
