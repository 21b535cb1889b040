"""Diversity-aware device scheduling for federated edge learning."""
from .diversity import DeviceMetrics, MetricWeights, diversity_index, gini_simpson, label_distribution
from .radio import RadioParams, achievable_rate
from .scheduler import (
    Device,
    InfeasibleScheduleError,
    SchedulerConfig,
    brute_force_oracle,
    schedule_abs,
    schedule_all,
    schedule_das,
    schedule_random,
    solve_sub2,
)
from .simulator import SimConfig, run_experiment, run_sweep

__version__ = "0.1.0"
