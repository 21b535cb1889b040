"""
Scheduling a single round
=========================

Draw a random 10-device cell, let DAS pick devices and split the band,
then compare with exhaustive search and the three baselines.
"""

import numpy as np

from feelsched.instances import random_instance
from feelsched.scheduler import InfeasibleScheduleError, allocate, brute_force_oracle, schedule_abs, schedule_all, schedule_das, schedule_random

rng = np.random.default_rng(4)
inst = random_instance(10, rng)
for d, i in zip(inst.devices, inst.index):
    print(f"device {d.device_id}: |h|^2={d.gain_sq:.2e}  P={d.power_w:.2f} W  t_train={d.train_time_s:.3f} s  index={i:.3f}")

das = schedule_das(inst.devices, inst.index, inst.params, inst.config)
best = brute_force_oracle(inst.devices, inst.index, inst.params, inst.config)
print("\nDAS    ", das.selected_ids, f"J={das.objective:.4f}  T={das.predicted_T:.3f} s  E={das.energy.sum():.4f} J")
print("oracle ", best.selected_ids, f"J={best.objective:.4f}")

# Baselines pick a fixed number of devices and then get the same bandwidth split.
m = len(das.selected_ids)
ages = rng.integers(0, 10, len(inst.devices))
for name, sel in [
    ("abs", schedule_abs(ages, m, rng)),
    ("random", schedule_random(len(inst.devices), m, rng)),
    ("all", schedule_all(inst.devices)),
]:
    try:
        d = allocate(inst.devices, sel, inst.index, inst.params, inst.config)
    except InfeasibleScheduleError as exc:  # a baseline may pick a device that cannot be served
        print(f"{name:7s} infeasible: {exc}")
        continue
    print(f"{name:7s}", d.selected_ids, f"J={d.objective:.4f}  T={d.predicted_T:.3f} s  E={d.energy.sum():.4f} J")
