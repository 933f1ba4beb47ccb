"""Robustness of the entanglement pulse against a thermal initial state.

Starts from the Gibbs state of H0 at temperature kT (units of J) and
locates the temperature above which the peak concurrence vanishes.

    python demos/temperature.py [N]
"""

import sys

from xxzquench import ModelParams, find_peak, temperature_threshold, thermal_trajectory

N = int(sys.argv[1]) if len(sys.argv) > 1 else 8
params = ModelParams(N=N, J1=-0.1)

for kt in (0.05, 0.2, 0.4, 0.6, 0.8):
    print(f"kT={kt:4.2f}  c_max={find_peak(thermal_trajectory(params, kt)).c_max:.4f}")
print(f"vanishing threshold kT = {temperature_threshold(params, 0.05, 3.0, tol=0.005):.3f}")
