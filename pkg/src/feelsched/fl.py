"""Federated learning core: a two-layer MLP trained with plain SGD and FedAvg aggregation.

Parameters travel as one flat float64 vector laid out as W1 (in x hidden, row-major),
b1, W2 (hidden x classes), b2.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, device_id: int = -1):
        super().__init__(f"non-finite training loss at epoch {epoch} (device {device_id})")
        self.epoch = epoch
        self.device_id = device_id


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on sample count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label outside [0, num_classes)")

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)


@dataclass
class GlobalModel:
    dims: tuple[int, int, int]  # (input_dim, hidden_dim, num_classes)
    params: np.ndarray
    version: int = 0

    def __post_init__(self):
        if self.params.shape != (param_count(self.dims),):
            raise ValueError(f"expected {param_count(self.dims)} parameters, got {self.params.shape}")


@dataclass
class LocalUpdate:
    device_id: int
    params: np.ndarray
    dataset_size: int
    train_loss: float


def param_count(dims) -> int:
    d, h, c = dims
    return d * h + h + h * c + c


def unpack(params: np.ndarray, dims):
    """Views (W1, b1, W2, b2) into a flat parameter vector."""
    d, h, c = dims
    i = 0
    W1 = params[i:i + d * h].reshape(d, h)
    i += d * h
    b1 = params[i:i + h]
    i += h
    W2 = params[i:i + h * c].reshape(h, c)
    i += h * c
    b2 = params[i:i + c]
    return W1, b1, W2, b2


def init_model(dims, seed: int) -> GlobalModel:
    d, h, c = dims
    if min(dims) < 1:
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    params = np.zeros(param_count(dims))
    W1, _, W2, _ = unpack(params, dims)
    W1[:] = rng.uniform(-1, 1, size=(d, h)) / np.sqrt(d)
    W2[:] = rng.uniform(-1, 1, size=(h, c)) / np.sqrt(h)
    return GlobalModel((d, h, c), params, 0)


def logits(params, dims, X) -> np.ndarray:
    W1, b1, W2, b2 = unpack(params, dims)
    return np.maximum(X @ W1 + b1, 0.0) @ W2 + b2


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def loss_and_grad(params, dims, X, y):
    """Mean softmax cross-entropy and its gradient w.r.t. the flat parameters."""
    W1, b1, W2, b2 = unpack(params, dims)
    n = X.shape[0]
    pre = X @ W1 + b1
    hid = np.maximum(pre, 0.0)
    logp = _log_softmax(hid @ W2 + b2)
    loss = -logp[np.arange(n), y].mean()

    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    grad = np.empty_like(params)
    gW1, gb1, gW2, gb2 = unpack(grad, dims)
    gW2[:] = hid.T @ dz
    gb2[:] = dz.sum(axis=0)
    dpre = (dz @ W2.T) * (pre > 0)
    gW1[:] = X.T @ dpre
    gb1[:] = dpre.sum(axis=0)
    return float(loss), grad


def local_train(
    model: GlobalModel,
    data: Dataset,
    epochs: int = 1,
    learning_rate: float = 0.01,
    batch_size: int = 32,
    seed: int = 0,
    device_id: int = -1,
) -> LocalUpdate:
    """E epochs of shuffled mini-batch SGD starting from the global parameters."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    rng = np.random.default_rng(seed)
    w = model.params.copy()
    n = len(data)
    epoch_loss = float("nan")
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            loss, grad = loss_and_grad(w, model.dims, data.features[batch], data.labels[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, device_id)
            total += loss * batch.size
            w -= learning_rate * grad
        epoch_loss = total / n
        if not np.all(np.isfinite(w)):
            raise TrainingDivergedError(epoch, device_id)
    return LocalUpdate(device_id, w, n, epoch_loss)


def fedavg_aggregate(model: GlobalModel, updates: Sequence[LocalUpdate], sizes=None) -> GlobalModel:
    """Dataset-size-weighted average of local parameters; bumps the version.

    Updates are summed in device-id order so the result does not depend on arrival order.
    """
    if not updates:
        raise ValueError("need at least one update")
    if sizes is None:
        sizes = [u.dataset_size for u in updates]
    if len(sizes) != len(updates):
        raise ValueError("one size per update required")
    for u in updates:
        if u.params.shape != model.params.shape:
            raise ValueError(f"update from device {u.device_id} has shape {u.params.shape}")
    if min(sizes) <= 0:
        raise ValueError("dataset sizes must be positive")
    order = sorted(range(len(updates)), key=lambda i: updates[i].device_id)
    total = float(sum(sizes))
    acc = np.zeros_like(model.params)
    for i in order:
        acc += (sizes[i] / total) * updates[i].params
    return GlobalModel(model.dims, acc, model.version + 1)


def evaluate(model: GlobalModel, test: Dataset) -> dict:
    """Accuracy (argmax, ties to the lowest class id) and mean cross-entropy."""
    if len(test) == 0:
        raise ValueError("empty test set")
    z = logits(model.params, model.dims, test.features)
    pred = np.argmax(z, axis=1)
    logp = _log_softmax(z)
    return {
        "accuracy": float(np.mean(pred == test.labels)),
        "loss": float(-logp[np.arange(len(test)), test.labels].mean()),
    }


# Checkpoint: ASCII header line, then little-endian float64 parameters.
_CKPT_MAGIC = "FEELSCHED-MLP"
_CKPT_VERSION = 1


def save_checkpoint(model: GlobalModel, path) -> None:
    d, h, c = model.dims
    header = f"{_CKPT_MAGIC} {_CKPT_VERSION} {d} {h} {c} {model.version}\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(model.params.astype("<f8").tobytes())


def load_checkpoint(path) -> GlobalModel:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    fields = head.decode("ascii").split()
    if len(fields) != 6 or fields[0] != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    if int(fields[1]) != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {fields[1]}")
    dims = tuple(int(v) for v in fields[2:5])
    expected = param_count(dims) * 8
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} parameter bytes, found {len(body)}")
    params = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return GlobalModel(dims, params, int(fields[5]))
