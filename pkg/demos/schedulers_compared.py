"""
DAS against the baselines on non-IID data
=========================================

A scaled-down version of the acceptance experiment: 40 devices, a few seeds,
mean accuracy and energy per scheduler.  Takes well under a minute.
"""

import numpy as np

from feelsched.scheduler import SchedulerConfig
from feelsched.simulator import DataConfig, SimConfig, load_data, run_sweep

data = DataConfig(samples_per_class=2400)
dataset = load_data(data)
sc = SchedulerConfig(max_devices=5)

for name in ("das", "abs", "random", "all"):
    cfg = SimConfig(num_devices=40, rounds=8, scheduler=name, scheduler_config=sc, data=data, seed=0)
    sweep = run_sweep(cfg, 3)
    curve = sweep.curves["mean_accuracy"]
    energy = np.mean([r.total_energy_j for r in sweep.results])
    frac = np.mean([r.mean_selected_fraction for r in sweep.results])
    print(f"{name:6s} accuracy by round {np.round(curve, 3)}  energy {energy:8.2f} J  selected {frac:.2f}")
