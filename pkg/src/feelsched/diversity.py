"""Dataset diversity measures and the server-side weighted diversity index."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class EmptyDistributionError(ValueError):
    """Raised when a diversity score is requested for a device with no data."""


@dataclass(frozen=True)
class LabelDistribution:
    probabilities: tuple[float, ...]
    num_classes: int
    empty: bool = False
    counts: tuple[int, ...] | None = None  # kept when built from labels, for exact arithmetic

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if len(self.probabilities) != self.num_classes:
            raise ValueError("probabilities length must equal num_classes")
        if self.empty:
            return
        if any(p < 0 for p in self.probabilities):
            raise ValueError("probabilities must be non-negative")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")


@dataclass(frozen=True)
class MetricWeights:
    gamma_diversity: float = 1 / 3
    gamma_size: float = 1 / 3
    gamma_age: float = 1 / 3

    def __post_init__(self):
        if min(self.gamma_diversity, self.gamma_size, self.gamma_age) < 0:
            raise ValueError("metric weights must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma_diversity, self.gamma_size, self.gamma_age])


@dataclass(frozen=True)
class DeviceMetrics:
    dataset_diversity: float
    dataset_size: int
    age: int

    def __post_init__(self):
        if not 0.0 <= self.dataset_diversity <= 1.0:
            raise ValueError("dataset_diversity must lie in [0, 1]")
        if self.dataset_size < 0 or self.age < 0:
            raise ValueError("dataset_size and age must be non-negative")


@dataclass(frozen=True)
class DiversityReport:
    device_id: int
    metrics: DeviceMetrics
    normalized: tuple[float, float, float]
    index: float


def label_distribution(labels: Sequence[int], num_classes: int) -> LabelDistribution:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return LabelDistribution((0.0,) * num_classes, num_classes, empty=True)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("label outside [0, num_classes)")
    counts = np.bincount(labels, minlength=num_classes)
    return LabelDistribution(tuple((counts / labels.size).tolist()), num_classes, counts=tuple(counts.tolist()))


def gini_simpson(dist: LabelDistribution) -> float:
    """1 - sum p^2: chance that two draws (with replacement) carry different labels."""
    if dist.empty:
        raise EmptyDistributionError("no data: Gini-Simpson undefined for an empty dataset")
    if dist.counts is not None:
        # integer sums, one rounding in the division: the uniform case gives exactly 1 - 1/m
        n = sum(dist.counts)
        return 1.0 - sum(c * c for c in dist.counts) / (n * n)
    return 1.0 - math.fsum(p * p for p in dist.probabilities)


def shannon_entropy(dist: LabelDistribution) -> float:
    """Label entropy normalized by log(num_classes) into [0, 1]."""
    if dist.empty:
        raise EmptyDistributionError("no data: entropy undefined for an empty dataset")
    if dist.num_classes == 1:
        return 0.0
    p = np.asarray(dist.probabilities)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)) / math.log(dist.num_classes))


DIVERSITY_MEASURES = {"gini_simpson": gini_simpson, "entropy": shannon_entropy}


def normalize_metric(values: Sequence[float]) -> np.ndarray:
    """value / max(values), with 0/0 := 0."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("metric values must be non-negative")
    if v.size == 0:
        return v
    top = v.max()
    if top == 0:
        return np.zeros_like(v)
    return v / top


def diversity_index(
    metrics: Sequence[DeviceMetrics],
    weights: MetricWeights = MetricWeights(),
    device_ids: Sequence[int] | None = None,
) -> list[DiversityReport]:
    """Weighted sum of population-max-normalized diversity, size and age per device."""
    if len(metrics) == 0:
        raise ValueError("need at least one device")
    if device_ids is None:
        device_ids = range(len(metrics))
    v_div = normalize_metric([m.dataset_diversity for m in metrics])
    v_size = normalize_metric([m.dataset_size for m in metrics])
    v_age = normalize_metric([m.age for m in metrics])
    g = weights
    reports = []
    for k, (dev_id, m) in enumerate(zip(device_ids, metrics)):
        v = (float(v_div[k]), float(v_size[k]), float(v_age[k]))
        index = v[0] * g.gamma_diversity + v[1] * g.gamma_size + v[2] * g.gamma_age
        reports.append(DiversityReport(int(dev_id), m, v, index))
    return reports
