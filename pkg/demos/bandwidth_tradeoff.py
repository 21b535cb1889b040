"""
Time versus energy in the bandwidth split
=========================================

For a fixed set of devices, rho moves the optimum between the fastest round
(rho = 1) and the cheapest one (rho = 0).
"""

import numpy as np

from feelsched.radio import RadioParams
from feelsched.scheduler import Device, solve_sub2

params = RadioParams()
devices = [
    Device(0, 2.0e-7, 2.0, 0.05),
    Device(1, 5.0e-8, 4.0, 0.12),
    Device(2, 1.2e-8, 1.5, 0.02),
    Device(3, 4.0e-9, 3.0, 0.08),
]

print(" rho     T [s]    E [J]   alpha")
for rho in np.linspace(0, 1, 11):
    a = solve_sub2(devices, params, rho)
    shares = " ".join(f"{x:.3f}" for x in a.alpha)
    print(f"{rho:4.1f}  {a.predicted_T:8.4f}  {a.energy.sum():7.4f}   {shares}")

# The weakest channel gets the biggest share when time matters,
# and gives some back when energy matters.
