"""Datasets for the simulator: MNIST IDX files, a synthetic stand-in, and label-sorted shard partitioning."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fl import Dataset

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    shape = struct.unpack(f">{ndim}I", raw[4:header_len])
    size = int(np.prod(shape))
    body = raw[header_len:]
    if len(body) < size:
        raise TruncatedFileError(f"{path}: expected {size} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8, count=size).reshape(shape)


def load_idx(images_path, labels_path, num_classes: int | None = None) -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 1
    return Dataset(features, labels, num_classes)


def write_idx(images, labels, images_path, labels_path) -> None:
    """Write uint8 images (n, rows, cols) and labels (n,) as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def synthetic_dataset(num_classes: int, samples_per_class: int, feature_dim: int, cluster_spread: float, seed: int) -> Dataset:
    """Gaussian clusters around uniform random class centers, clipped to [0, 1]."""
    if min(num_classes, samples_per_class, feature_dim) < 1:
        raise ValueError("counts must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(num_classes, feature_dim))
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    noise = rng.normal(0.0, 1.0, size=(labels.size, feature_dim)) * cluster_spread
    features = np.clip(centers[labels] + noise, 0.0, 1.0)
    return Dataset(features, labels.astype(np.int64), num_classes)


@dataclass
class Partition:
    device_indices: list[np.ndarray]  # sample indices into the parent dataset
    shard_owner: np.ndarray  # device id per shard, -1 when unused
    shards: np.ndarray  # (num_shards, shard_size) sample indices

    @property
    def num_shards(self) -> int:
        return int(self.shards.shape[0])

    def shard_counts(self) -> np.ndarray:
        owners = self.shard_owner[self.shard_owner >= 0]
        return np.bincount(owners, minlength=len(self.device_indices))


def make_shards(labels, shard_size: int) -> np.ndarray:
    """Label-sorted sample indices cut into consecutive shards; a short tail is dropped."""
    order = np.argsort(np.asarray(labels), kind="stable")
    n = (order.size // shard_size) * shard_size
    return order[:n].reshape(-1, shard_size)


def shard_partition(dataset: Dataset, shard_size: int, shards_per_device_range, num_devices: int, seed: int) -> Partition:
    """Deal label-sorted shards to devices, each device drawing its shard count uniformly.

    Shards run out before demand does in typical settings; later devices then get
    fewer than they drew, but never below the range minimum.  Leftover shards stay unused.
    """
    lo, hi = shards_per_device_range
    if not 1 <= lo <= hi:
        raise ValueError("invalid shards-per-device range")
    if len(dataset) < shard_size:
        raise ValueError("dataset smaller than one shard")
    shards = make_shards(dataset.labels, shard_size)
    if shards.shape[0] < lo * num_devices:
        raise ValueError(
            f"{shards.shape[0]} shards cannot give {num_devices} devices at least {lo} each"
        )
    rng = np.random.default_rng(seed)
    wanted = rng.integers(lo, hi + 1, size=num_devices)
    deck = rng.permutation(shards.shape[0])
    owner = np.full(shards.shape[0], -1, dtype=np.int64)
    indices = []
    pos = 0
    for k in range(num_devices):
        reserve = lo * (num_devices - k - 1)
        take = int(min(wanted[k], deck.size - pos - reserve))
        mine = deck[pos:pos + take]
        pos += take
        owner[mine] = k
        indices.append(np.sort(shards[mine].ravel()))
    return Partition(indices, owner, shards)


def train_test_split(dataset: Dataset, partition: Partition, test_fraction: float, seed: int):
    """Hold out a fraction of every device's samples into one pooled test set.

    Returns (per-device train Datasets, per-device train indices, pooled test Dataset).
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for k, idx in enumerate(partition.device_indices):
        perm = rng.permutation(idx)
        n_test = int(round(test_fraction * idx.size))
        if idx.size - n_test < 1:
            raise ValueError(f"device {k} is left with no training samples")
        test_idx.append(perm[:n_test])
        train_idx.append(np.sort(perm[n_test:]))
    test = np.sort(np.concatenate(test_idx)) if test_idx else np.array([], dtype=np.int64)
    return [dataset.subset(i) for i in train_idx], train_idx, dataset.subset(test)
