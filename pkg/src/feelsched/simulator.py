"""Round loop of a federated edge learning deployment.

Every run is driven by one integer seed.  Each random quantity (placement, device
hardware, data partition, per-round fading, local SGD shuffling, baseline picks) draws
from its own stream keyed by (seed, purpose, ...), so runs are reproducible and
independent of execution order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fl
from .dataio import load_idx, shard_partition, synthetic_dataset, train_test_split
from .diversity import DIVERSITY_MEASURES, DeviceMetrics, MetricWeights, diversity_index, label_distribution
from .radio import (
    DeviceRadioState,
    RadioParams,
    channel_gain,
    rate_from_snr,
    round_duration,
    sample_rayleigh_power,
    snr_coefficient,
    upload_energy,
    upload_time,
)
from .scheduler import (
    Device,
    InfeasibleScheduleError,
    SchedulerConfig,
    allocate,
    schedule_abs,
    schedule_all,
    schedule_das,
    schedule_random,
)

SCHEDULERS = ("das", "abs", "random", "all")

# stream tags
_PLACE, _HARDWARE, _PARTITION, _SPLIT, _INIT, _FADING, _TRAIN, _PICK = range(8)


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def _seed(*key: int) -> int:
    return int(_rng(*key).integers(2**63))


@dataclass(frozen=True)
class DeviceRanges:
    power_w: tuple[float, float] = (1.0, 5.0)
    cpu_hz: tuple[float, float] = (1e9, 3e9)
    cycles_per_bit: tuple[float, float] = (10.0, 30.0)


@dataclass(frozen=True)
class FLConfig:
    hidden_dim: int = 64
    learning_rate: float = 0.01
    batch_size: int = 32
    local_epochs: int = 1
    bits_per_sample: float = 6272.0  # 28x28 pixels, 8 bits each


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # or "idx"
    num_classes: int = 10
    samples_per_class: int = 6000
    feature_dim: int = 20
    cluster_spread: float = 0.3
    data_seed: int = 0  # the synthetic dataset itself; partitions follow the run seed
    images_path: str = ""
    labels_path: str = ""
    shard_size: int = 50
    shards_min: int = 1
    shards_max: int = 30
    test_fraction: float = 0.1
    diversity_measure: str = "gini_simpson"

    def __post_init__(self):
        if self.source not in ("synthetic", "idx"):
            raise ValueError(f"unknown data source {self.source!r}; expected 'synthetic' or 'idx'")
        if self.diversity_measure not in DIVERSITY_MEASURES:
            raise ValueError(f"unknown diversity measure {self.diversity_measure!r}")


@dataclass(frozen=True)
class SimConfig:
    num_devices: int = 100
    rounds: int = 15
    target_accuracy: float = 1.0
    scheduler: str = "das"
    scheduler_config: SchedulerConfig = field(default_factory=SchedulerConfig)
    radio: RadioParams = field(default_factory=RadioParams)
    fl: FLConfig = field(default_factory=FLConfig)
    data: DataConfig = field(default_factory=DataConfig)
    ranges: DeviceRanges = field(default_factory=DeviceRanges)
    metric_weights: MetricWeights = field(default_factory=MetricWeights)
    selected_fraction_cap: float | None = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}; valid: {', '.join(SCHEDULERS)}")
        if self.num_devices < self.min_devices:
            raise ValueError("need at least N devices")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        # 0 is allowed and means "stop after the first round"
        if not 0.0 <= self.target_accuracy <= 1.0:
            raise ValueError("target_accuracy must lie in [0, 1]")

    @property
    def min_devices(self) -> int:
        return self.scheduler_config.min_devices


@dataclass
class RoundMetrics:
    round: int
    selected: list[int]
    alpha: list[float]  # per selected device, same order
    energy: list[float]  # J per selected device
    duration_s: float
    accuracy: float
    loss: float
    cumulative_energy_j: float
    cumulative_time_s: float

    @property
    def round_energy_j(self) -> float:
        return math.fsum(self.energy)

    @property
    def num_selected(self) -> int:
        return len(self.selected)


@dataclass
class ExperimentResult:
    scheduler: str
    seed: int
    num_devices: int
    rounds: list[RoundMetrics]
    rounds_to_target: int | None
    selection_counts: list[int]
    cap_exceeded_rounds: list[int] = field(default_factory=list)

    @property
    def total_energy_j(self) -> float:
        return self.rounds[-1].cumulative_energy_j if self.rounds else 0.0

    @property
    def completion_time_s(self) -> float:
        return self.rounds[-1].cumulative_time_s if self.rounds else 0.0

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].accuracy if self.rounds else float("nan")

    @property
    def mean_selected_fraction(self) -> float:
        return float(np.mean([r.num_selected for r in self.rounds])) / self.num_devices

    def summary(self) -> dict:
        return {
            "scheduler": self.scheduler,
            "seed": self.seed,
            "rounds_run": len(self.rounds),
            "rounds_to_target": self.rounds_to_target,
            "final_accuracy": self.final_accuracy,
            "total_energy_J": self.total_energy_j,
            "completion_time_s": self.completion_time_s,
            "mean_selected_fraction": self.mean_selected_fraction,
            "cap_exceeded_rounds": self.cap_exceeded_rounds,
            "selection_counts": self.selection_counts,
        }


class RoundFailedError(RuntimeError):
    def __init__(self, round_index: int, cause: Exception):
        super().__init__(f"round {round_index} failed: {cause}")
        self.round_index = round_index
        self.cause = cause


def place_devices(K: int, cell_side: float, seed: int) -> np.ndarray:
    """K positions uniform in a square centred on the base station; none within 1 m of it."""
    if K < 1 or cell_side <= 0:
        raise ValueError("need K >= 1 and a positive cell side")
    rng = np.random.default_rng(seed)
    half = cell_side / 2
    pos = rng.uniform(-half, half, size=(K, 2))
    close = np.hypot(pos[:, 0], pos[:, 1]) < 1.0
    while close.any():
        pos[close] = rng.uniform(-half, half, size=(int(close.sum()), 2))
        close = np.hypot(pos[:, 0], pos[:, 1]) < 1.0
    return pos


def load_data(cfg: DataConfig) -> fl.Dataset:
    if cfg.source == "idx":
        return load_idx(cfg.images_path, cfg.labels_path, cfg.num_classes)
    return synthetic_dataset(cfg.num_classes, cfg.samples_per_class, cfg.feature_dim, cfg.cluster_spread, cfg.data_seed)


def make_partition(config: SimConfig, dataset: fl.Dataset):
    d = config.data
    return shard_partition(
        dataset, d.shard_size, (d.shards_min, d.shards_max), config.num_devices, _seed(config.seed, _PARTITION)
    )


@dataclass
class SimState:
    config: SimConfig
    positions: np.ndarray
    distance: np.ndarray
    power_w: np.ndarray
    cpu_hz: np.ndarray
    cycles_per_bit: np.ndarray
    train: list[fl.Dataset]
    test: fl.Dataset
    diversity: np.ndarray  # label diversity of each local training set
    model: fl.GlobalModel
    ages: np.ndarray
    selection_counts: np.ndarray
    cumulative_energy: float = 0.0
    cumulative_time: float = 0.0
    history: list[RoundMetrics] = field(default_factory=list)


def init_state(config: SimConfig, dataset: fl.Dataset | None = None) -> SimState:
    seed, K = config.seed, config.num_devices
    if dataset is None:
        dataset = load_data(config.data)
    d = config.data
    part = make_partition(config, dataset)
    train, _, test = train_test_split(dataset, part, d.test_fraction, _seed(seed, _SPLIT))
    measure = DIVERSITY_MEASURES[d.diversity_measure]
    diversity = np.array([measure(label_distribution(t.labels, dataset.num_classes)) for t in train])

    pos = place_devices(K, config.radio.cell_side, _seed(seed, _PLACE))
    hw = _rng(seed, _HARDWARE)
    r = config.ranges
    power = hw.uniform(*r.power_w, size=K)
    cpu = hw.uniform(*r.cpu_hz, size=K)
    cpb = hw.uniform(*r.cycles_per_bit, size=K)

    dims = (dataset.feature_dim, config.fl.hidden_dim, dataset.num_classes)
    model = fl.init_model(dims, _seed(seed, _INIT))
    return SimState(
        config, pos, np.hypot(pos[:, 0], pos[:, 1]), power, cpu, cpb, train, test, diversity, model,
        np.zeros(K, dtype=np.int64), np.zeros(K, dtype=np.int64),
    )


def _radio_states(state: SimState, gain_sq: np.ndarray) -> list[DeviceRadioState]:
    return [
        DeviceRadioState(
            (float(state.positions[k, 0]), float(state.positions[k, 1])),
            float(state.distance[k]),
            float(gain_sq[k]),
            float(state.power_w[k]),
            float(state.cpu_hz[k]),
            float(state.cycles_per_bit[k]),
            state.config.fl.bits_per_sample,
        )
        for k in range(state.config.num_devices)
    ]


def _decide(state: SimState, devices: list[Device], index: np.ndarray, round_index: int):
    cfg = state.config
    sc = cfg.scheduler_config
    K = cfg.num_devices
    if cfg.scheduler == "das":
        return schedule_das(devices, index, cfg.radio, sc)
    if cfg.scheduler == "all":
        selection = schedule_all(devices)
    else:
        rng = _rng(cfg.seed, _PICK, round_index)
        m = min(sc.baseline_count, K)
        if cfg.scheduler == "abs":
            selection = schedule_abs(state.ages, m, rng)
        else:
            selection = schedule_random(K, m, rng)
    return allocate(devices, selection, index, cfg.radio, sc)


def run_round(state: SimState, round_index: int) -> RoundMetrics:
    """One round: fading, device reports, scheduling, local training, aggregation, evaluation."""
    cfg = state.config
    K = cfg.num_devices
    fading = sample_rayleigh_power(_rng(cfg.seed, _FADING, round_index), K)
    gain = channel_gain(state.distance, cfg.radio.pathloss_exponent, fading)
    radio = _radio_states(state, gain)
    devices = [
        Device.from_state(k, radio[k], len(state.train[k]), cfg.fl.local_epochs) for k in range(K)
    ]
    metrics = [
        DeviceMetrics(float(min(max(state.diversity[k], 0.0), 1.0)), len(state.train[k]), int(state.ages[k]))
        for k in range(K)
    ]
    index = np.array([r.index for r in diversity_index(metrics, cfg.metric_weights)])

    try:
        decision = _decide(state, devices, index, round_index)
    except (InfeasibleScheduleError, ValueError) as exc:
        raise RoundFailedError(round_index, exc) from exc
    chosen = decision.selected_ids

    # Recompute time and energy from the allocation with the radio model.
    alpha = decision.alpha[chosen]
    snr = snr_coefficient(gain[chosen], state.power_w[chosen], cfg.radio)
    t_up = np.atleast_1d(upload_time(cfg.radio.model_size_bits, rate_from_snr(alpha, snr, cfg.radio.bandwidth_hz)))
    energy = np.atleast_1d(upload_energy(state.power_w[chosen], t_up))
    completion = np.array([devices[k].train_time_s for k in chosen]) + t_up
    duration = round_duration(completion)

    fc = cfg.fl
    updates = [
        fl.local_train(
            state.model, state.train[k], fc.local_epochs, fc.learning_rate, fc.batch_size,
            _seed(cfg.seed, _TRAIN, round_index, k), k,
        )
        for k in chosen
    ]
    state.model = fl.fedavg_aggregate(state.model, updates)
    scores = fl.evaluate(state.model, state.test)

    selected = np.zeros(K, dtype=bool)
    selected[chosen] = True
    state.ages = np.where(selected, 0, state.ages + 1)
    state.selection_counts += selected
    state.cumulative_energy += math.fsum(energy.tolist())
    state.cumulative_time += duration
    rm = RoundMetrics(
        round_index,
        [int(k) for k in chosen],
        [float(a) for a in alpha],
        [float(e) for e in energy],
        float(duration),
        scores["accuracy"],
        scores["loss"],
        state.cumulative_energy,
        state.cumulative_time,
    )
    state.history.append(rm)
    return rm


def run_experiment(config: SimConfig, dataset: fl.Dataset | None = None) -> ExperimentResult:
    """Rounds until the round cap is reached or the target accuracy is met, whichever comes first."""
    state = init_state(config, dataset)
    reached = None
    cap_hits = []
    for r in range(1, config.rounds + 1):
        rm = run_round(state, r)
        cap = config.selected_fraction_cap
        if cap is not None and rm.num_selected / config.num_devices > cap:
            cap_hits.append(r)
        if rm.accuracy >= config.target_accuracy:
            reached = r
            break
    return ExperimentResult(
        config.scheduler, config.seed, config.num_devices, state.history, reached,
        [int(c) for c in state.selection_counts], cap_hits,
    )


@dataclass
class SweepResult:
    results: list[ExperimentResult]
    failures: list[tuple[int, str]]  # (seed, error message)
    curves: dict[str, np.ndarray]


def _run_one(config: SimConfig):
    try:
        return run_experiment(config), None
    except RoundFailedError as exc:
        return None, str(exc)


def mean_curves(results: list[ExperimentResult]) -> dict[str, np.ndarray]:
    """Per-round mean/std over the runs that reached each round."""
    n = max((len(r.rounds) for r in results), default=0)
    out = {k: np.full(n, np.nan) for k in ("round", "mean_accuracy", "std_accuracy", "mean_energy", "mean_duration")}
    # runs in seed order, so the means do not depend on completion order
    results = sorted(results, key=lambda r: r.seed)
    for i in range(n):
        rows = [r.rounds[i] for r in results if len(r.rounds) > i]
        acc = np.array([m.accuracy for m in rows])
        out["round"][i] = i + 1
        out["mean_accuracy"][i] = acc.mean()
        out["std_accuracy"][i] = acc.std()
        out["mean_energy"][i] = np.mean([m.round_energy_j for m in rows])
        out["mean_duration"][i] = np.mean([m.duration_s for m in rows])
    return out


def run_sweep(config: SimConfig, num_runs: int, base_seed: int | None = None, jobs: int = 1) -> SweepResult:
    """Independent runs with seeds base_seed .. base_seed + num_runs - 1."""
    if num_runs < 1:
        raise ValueError("num_runs must be >= 1")
    base = config.seed if base_seed is None else base_seed
    configs = [replace(config, seed=base + i) for i in range(num_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, configs))
    else:
        outcomes = [_run_one(c) for c in configs]
    results = [r for r, _ in outcomes if r is not None]
    failures = [(c.seed, err) for c, (_, err) in zip(configs, outcomes) if err is not None]
    return SweepResult(results, failures, mean_curves(results))
