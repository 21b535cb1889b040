"""Uplink transmission model: channel gain, OFDMA rate, compute/upload time and energy.

All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RadioParams:
    bandwidth_hz: float = 1e6
    noise_psd: float = 1e-13  # W/Hz
    pathloss_exponent: float = 3.0
    cell_side: float = 500.0  # m
    model_size_bits: float = 1e5

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.noise_psd <= 0 or self.model_size_bits <= 0:
            raise ValueError("bandwidth, noise PSD and model size must be positive")
        if self.pathloss_exponent < 2:
            raise ValueError("pathloss exponent must be >= 2")
        if self.cell_side <= 0:
            raise ValueError("cell side must be positive")


@dataclass(frozen=True)
class DeviceRadioState:
    position: tuple[float, float]
    distance: float
    gain_sq: float
    power_w: float
    cpu_hz: float
    cycles_per_bit: float
    bits_per_sample: float = 6272.0

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        if self.gain_sq < 0:
            raise ValueError("channel gain must be non-negative")
        if self.power_w <= 0 or self.cpu_hz <= 0 or self.cycles_per_bit <= 0:
            raise ValueError("power, CPU frequency and cycles/bit must be positive")
        if self.bits_per_sample < 1:
            raise ValueError("bits_per_sample must be >= 1")


def channel_gain(distance, pathloss_exponent, rayleigh_sample):
    """Power gain |g|^2 = d^-exponent * |h|^2."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive (pathloss singularity at d=0)")
    out = d ** (-float(pathloss_exponent)) * np.asarray(rayleigh_sample, dtype=float)
    return float(out) if out.ndim == 0 else out


def sample_rayleigh_power(rng: np.random.Generator, size=None):
    """|h|^2 of a unit-power Rayleigh channel, i.e. Exp(1)."""
    return rng.exponential(1.0, size=size)


def snr_coefficient(gain_sq, power_w, params: RadioParams):
    """g*P/(B*N0): the full-band SNR, i.e. SNR at alpha = 1."""
    return np.asarray(gain_sq, dtype=float) * np.asarray(power_w, dtype=float) / (
        params.bandwidth_hz * params.noise_psd
    )


def rate_from_snr(alpha, snr, bandwidth_hz):
    """alpha*B*log2(1 + snr/alpha), with the alpha -> 0 limit equal to 0."""
    alpha = np.asarray(alpha, dtype=float)
    snr = np.asarray(snr, dtype=float)
    alpha, snr = np.broadcast_arrays(alpha, snr)
    out = np.zeros(alpha.shape)
    pos = alpha > 0
    out[pos] = alpha[pos] * bandwidth_hz * np.log1p(snr[pos] / alpha[pos]) / LN2
    return float(out) if out.ndim == 0 else out


def achievable_rate(alpha, params: RadioParams, state: DeviceRadioState):
    """Uplink rate in bits/s for bandwidth share ``alpha`` in [0, 1]."""
    snr = snr_coefficient(state.gain_sq, state.power_w, params)
    return rate_from_snr(alpha, snr, params.bandwidth_hz)


def training_time(epochs, dataset_size, state: DeviceRadioState):
    """E * |D| * bits_per_sample * C / f seconds."""
    return epochs * dataset_size * state.bits_per_sample * state.cycles_per_bit / state.cpu_hz


def upload_time(model_size_bits, rate):
    """s / rate; ``inf`` when the rate is zero."""
    if model_size_bits <= 0:
        raise ValueError("model size must be positive")
    r = np.asarray(rate, dtype=float)
    if np.any(r < 0):
        raise ValueError("rate must be non-negative")
    with np.errstate(divide="ignore"):
        out = np.where(r > 0, model_size_bits / np.where(r > 0, r, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def upload_energy(power_w, upload_time_s):
    """P * t_up joules; infinite time gives infinite energy."""
    out = np.asarray(power_w, dtype=float) * np.asarray(upload_time_s, dtype=float)
    return float(out) if out.ndim == 0 else out


def round_duration(completion_times, selected=None) -> float:
    """Synchronous round length: max completion time over the selected devices."""
    t = np.asarray(completion_times, dtype=float)
    if selected is not None:
        t = t[np.asarray(selected, dtype=bool)]
    if t.size == 0:
        raise ValueError("round duration undefined for an empty selection")
    return float(t.max())
