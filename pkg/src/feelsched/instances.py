"""JSON scheduling instances: one self-contained document per instance, used by ``oracle``."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .radio import RadioParams
from .scheduler import Device, SchedulerConfig


@dataclass
class Instance:
    devices: list[Device]
    index: np.ndarray
    params: RadioParams
    config: SchedulerConfig


def _device_from_record(rec: dict, epochs: int, bits_per_sample: float) -> Device:
    size = int(rec.get("dataset_size", 0))
    if "train_time_s" in rec:
        t = float(rec["train_time_s"])
    else:
        t = epochs * size * bits_per_sample * float(rec["cycles_per_bit"]) / float(rec["cpu_hz"])
    return Device(int(rec["id"]), float(rec["gain_sq"]), float(rec["power_W"]), t, size)


def instance_from_dict(doc: dict) -> Instance:
    try:
        epochs = int(doc.get("epochs", 1))
        bits = float(doc.get("bits_per_sample", 6272.0))
        records = doc["devices"]
        devices = [_device_from_record(r, epochs, bits) for r in records]
        index = np.array([float(r["index"]) for r in records])
        p = doc.get("params", {})
        params = RadioParams(
            bandwidth_hz=float(p.get("bandwidth_hz", 1e6)),
            noise_psd=float(p.get("noise_psd", 1e-13)),
            model_size_bits=float(p.get("model_size_bits", 1e5)),
        )
        c = dict(doc.get("config", {}))
        if "N" in c:
            c["min_devices"] = c.pop("N")
        config = SchedulerConfig(**c)
    except KeyError as exc:
        raise ValueError(f"instance is missing key {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ValueError(f"bad instance: {exc}") from None
    if not devices:
        raise ValueError("instance has no devices")
    return Instance(devices, index, params, config)


def instance_to_dict(inst: Instance) -> dict:
    cfg = {
        "lambda_E": inst.config.lambda_E,
        "lambda_T": inst.config.lambda_T,
        "lambda_I": inst.config.lambda_I,
        "rho": inst.config.rho,
        "N": inst.config.min_devices,
        "deadline_s": inst.config.deadline_s,
    }
    if inst.config.max_devices is not None:
        cfg["max_devices"] = inst.config.max_devices
    return {
        "devices": [
            {
                "id": d.device_id,
                "gain_sq": d.gain_sq,
                "power_W": d.power_w,
                "train_time_s": d.train_time_s,
                "dataset_size": d.dataset_size,
                "index": float(i),
            }
            for d, i in zip(inst.devices, inst.index)
        ],
        "params": {
            "bandwidth_hz": inst.params.bandwidth_hz,
            "noise_psd": inst.params.noise_psd,
            "model_size_bits": inst.params.model_size_bits,
        },
        "config": cfg,
    }


def load_instance(path) -> Instance:
    with open(path) as f:
        return instance_from_dict(json.load(f))


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as f:
        json.dump(instance_to_dict(inst), f, indent=2)


def random_instance(K: int, rng: np.random.Generator, min_devices: int = 1, params: RadioParams = RadioParams()) -> Instance:
    """A cell-sized random population: uniform placement, Rayleigh fading, shard-sized datasets."""
    pos = rng.uniform(-params.cell_side / 2, params.cell_side / 2, size=(K, 2))
    dist = np.maximum(np.hypot(pos[:, 0], pos[:, 1]), 1.0)
    gain = dist ** (-params.pathloss_exponent) * rng.exponential(1.0, K)
    power = rng.uniform(1.0, 5.0, K)
    cpu = rng.uniform(1e9, 3e9, K)
    cpb = rng.uniform(10, 30, K)
    sizes = rng.integers(1, 31, K) * 45
    train = sizes * 6272.0 * cpb / cpu
    devices = [Device(k, float(gain[k]), float(power[k]), float(train[k]), int(sizes[k])) for k in range(K)]
    # index components drawn directly: label diversity, size and age, each max-normalized
    gini = rng.uniform(0.0, 0.9, K)
    age = rng.integers(0, 10, K).astype(float)
    parts = [gini, sizes.astype(float), age]
    index = sum(v / v.max() if v.max() > 0 else v for v in parts) / 3.0
    return Instance(devices, index, params, SchedulerConfig(min_devices=min_devices))
