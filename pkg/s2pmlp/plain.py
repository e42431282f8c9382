"""Centralized reference MLP.

Same layer layout as the secure engine: weights of layer l are
(d_{l-1}+1)×d_l with the bias in row 0, hidden layers use ReLU, the output
layer softmax, and updates use the summed (not averaged) batch gradient.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from s2pmlp.errors import DimensionError, UsageError
from s2pmlp.matcore import RealMatrix, derive_rng, dtrans, relu, relu_prime
from s2pmlp.schemas import MLPConfig


@dataclass
class PlainModel:
    layers: List[RealMatrix]

    def copy(self) -> "PlainModel":
        return PlainModel([w.copy() for w in self.layers])


@dataclass
class PlainTrace:
    """Pre-activations X^(l) and augmented activations Z^(l) of a forward pass"""
    X: List[RealMatrix]
    Z: List[RealMatrix]
    output: RealMatrix


EpochHook = Callable[[int, PlainModel, List[float]], None]


def augment(features: RealMatrix) -> RealMatrix:
    return np.hstack([np.ones((features.shape[0], 1)), features])


def softmax(logits: RealMatrix) -> RealMatrix:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def cross_entropy(probs: RealMatrix, onehot: RealMatrix) -> float:
    """Summed cross-entropy of a batch"""
    return float(-np.sum(onehot * np.log(np.clip(probs, 1e-300, None))))


def check_layers(dims, layers: List[RealMatrix]) -> None:
    if len(layers) != len(dims) - 1:
        raise DimensionError(f"expected {len(dims) - 1} layers, got {len(layers)}")
    for index, weights in enumerate(layers, start=1):
        expected = (dims[index - 1] + 1, dims[index])
        if weights.shape != expected:
            raise DimensionError(f"layer {index} has shape {weights.shape}, expected {expected}")


def xavier_init(cfg: MLPConfig) -> PlainModel:
    """Uniform Xavier weights with a zero bias row"""
    rng = derive_rng(cfg.split.seed, "init")
    layers = []
    for fan_in, fan_out in zip(cfg.dims[:-1], cfg.dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(np.vstack([np.zeros((1, fan_out)), weights]))
    return PlainModel(layers)


def plain_forward(model: PlainModel, z0: RealMatrix) -> PlainTrace:
    """Forward pass over an augmented input [1 | X]"""
    z = z0
    xs, zs = [], [z0]
    last = len(model.layers) - 1
    for index, weights in enumerate(model.layers):
        x = z @ weights
        xs.append(x)
        if index == last:
            return PlainTrace(xs, zs, softmax(x))
        z = augment(relu(x))
        zs.append(z)
    raise DimensionError("model has no layers")


def plain_gradients(model: PlainModel, trace: PlainTrace, onehot: RealMatrix) -> List[RealMatrix]:
    """δW^(l) = Z^(l-1)ᵀ G^(l) for every layer, using the pre-update weights"""
    count = len(model.layers)
    grads: List[Optional[RealMatrix]] = [None] * count
    g = trace.output - onehot
    grads[count - 1] = g
    for index in range(count - 2, -1, -1):
        g = (g @ dtrans(model.layers[index + 1])) * relu_prime(trace.X[index])
        grads[index] = g
    return [trace.Z[index].T @ grads[index] for index in range(count)]


def plain_loss(model: PlainModel, z0: RealMatrix, onehot: RealMatrix) -> float:
    return cross_entropy(plain_forward(model, z0).output, onehot)


def plain_step(model: PlainModel, z0: RealMatrix, onehot: RealMatrix, lr: float) -> Tuple[PlainModel, float]:
    """One gradient step; also returns the batch loss before the step"""
    trace = plain_forward(model, z0)
    grads = plain_gradients(model, trace, onehot)
    stepped = PlainModel([w - lr * dw for w, dw in zip(model.layers, grads)])
    return stepped, cross_entropy(trace.output, onehot)


def batch_slices(rows: int, batch: int) -> List[slice]:
    """Sequential batches; the last one holds the remainder"""
    count = -(-rows // batch)
    return [slice(i * batch, min((i + 1) * batch, rows)) for i in range(count)]


def epoch_order(cfg: MLPConfig, rows: int, epoch: int) -> np.ndarray:
    if not cfg.shuffle:
        return np.arange(rows)
    return derive_rng(cfg.split.seed, "shuffle", str(epoch)).permutation(rows)


def check_labels(onehot: RealMatrix, rows: int, classes: int) -> None:
    if onehot.shape != (rows, classes):
        raise DimensionError(f"labels have shape {onehot.shape}, expected {(rows, classes)}")
    if not (np.all((onehot == 0) | (onehot == 1)) and np.all(onehot.sum(axis=1) == 1)):
        raise UsageError("label rows must be one-hot")


def plain_mlp_train(
    cfg: MLPConfig,
    features: RealMatrix,
    onehot: RealMatrix,
    init: Optional[PlainModel] = None,
    on_epoch: Optional[EpochHook] = None,
) -> PlainModel:
    rows = features.shape[0]
    if rows == 0:
        raise UsageError("cannot train on an empty dataset")
    if features.shape[1] != cfg.dims[0]:
        raise DimensionError(f"expected {cfg.dims[0]} features, got {features.shape[1]}")
    check_labels(onehot, rows, cfg.dims[-1])

    model = (init or xavier_init(cfg)).copy()
    check_layers(cfg.dims, model.layers)
    z0 = augment(features)
    for epoch in range(1, cfg.epochs + 1):
        order = epoch_order(cfg, rows, epoch)
        losses = []
        for part in batch_slices(rows, cfg.batch):
            idx = order[part]
            model, loss = plain_step(model, z0[idx], onehot[idx], cfg.lr)
            losses.append(loss)
        if on_epoch is not None:
            on_epoch(epoch, model, losses)
    return model


def plain_mlp_predict(model: PlainModel, features: RealMatrix) -> RealMatrix:
    """Class probabilities for each row"""
    return plain_forward(model, augment(features)).output


def accuracy(probs: RealMatrix, onehot: RealMatrix) -> float:
    return float(np.mean(probs.argmax(axis=1) == onehot.argmax(axis=1)))
