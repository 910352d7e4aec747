"""Linear softmax head over the same feature vectors: the comparison model.

No uncertainty output, so it only participates in random-selection runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import NO_LABEL, FeatureDataset
from .errors import ValidationError
from .optim import Adam
from .rng import STREAM_TRAIN, derive_rng
from .svgp import TrainConfig


@dataclass
class SoftmaxModel:
    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    class_names: list[str]

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class SoftmaxTrace:
    loss_per_epoch: list[float] = field(default_factory=list)


def predict_softmax(model: SoftmaxModel, x: np.ndarray) -> np.ndarray:
    """Row-normalized softmax(W x + b), shape (n, C)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValidationError(f"inputs must be (n, {model.dim})")
    logits = x @ model.weights.T + model.bias
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p


def cross_entropy_and_grad(
    model: SoftmaxModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus gradients for weights and bias."""
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= model.num_classes):
        raise ValidationError(f"labels must be in [0, {model.num_classes})")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    logits = x @ model.weights.T + model.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), y]))
    p = np.exp(shifted - log_z[:, None])
    delta = p
    delta[np.arange(n), y] -= 1.0
    grad_w = delta.T @ x / n
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


def train_softmax(
    ds: FeatureDataset, labeled: np.ndarray, cfg: TrainConfig
) -> tuple[SoftmaxModel, SoftmaxTrace]:
    """Adam descent on mean cross-entropy from zero-initialized weights.

    The epoch trace records the full-set loss after each epoch's updates.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise ValidationError("cannot train with no labeled samples")
    x_all = ds.features64(labeled)
    y_all = ds.labels[labeled]
    if np.any(y_all == NO_LABEL):
        raise ValidationError("labeled set contains samples without labels")

    c = ds.n_classes
    model = SoftmaxModel(
        weights=np.zeros((c, ds.dim)),
        bias=np.zeros(c),
        class_names=list(ds.class_names),
    )
    n = labeled.size
    batch = cfg.minibatch_size or n
    size = model.weights.size + model.bias.size
    adam = Adam(size, lr=cfg.learning_rate)
    shuffle_rng = derive_rng(cfg.seed, STREAM_TRAIN, 2)
    trace = SoftmaxTrace()

    for _epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            _, grad_w, grad_b = cross_entropy_and_grad(model, x_all[idx], y_all[idx])
            flat = np.concatenate([model.weights.ravel(), model.bias])
            grad = -np.concatenate([grad_w.ravel(), grad_b])  # ascend the negative loss
            flat = adam.step(flat, grad)
            model.weights = flat[: model.weights.size].reshape(c, ds.dim)
            model.bias = flat[model.weights.size :]
        epoch_loss, _, _ = cross_entropy_and_grad(model, x_all, y_all)
        trace.loss_per_epoch.append(epoch_loss)
    return model, trace
