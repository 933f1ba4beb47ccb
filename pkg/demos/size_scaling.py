"""Finite-size scaling of the concurrence peak.

The peak arrives linearly in N while its height decays; the script fits
t_max and compares c_max with the xi(N) = 1.35 N^(-1/3) baseline. Sizes
above 12 use the MPS engine and take minutes each.

    python demos/size_scaling.py 8 12 16 20
"""

import sys

from xxzquench import EngineConfig, ModelParams, sweep_size, xi_baseline

sizes = [int(a) for a in sys.argv[1:]] or [8, 10, 12]
res = sweep_size(sizes, ModelParams(N=sizes[0], J1=-0.1), EngineConfig())

print("   N   c_max   t_max   xi(N)")
for n, s in zip(res.values, res.summaries):
    print(f"{n:4d}  {s.c_max:.4f}  {s.t_max:5.1f}  {xi_baseline(n):.4f}")
fit = res.extras["fit"]
print(f"t_max ~ {fit['slope']:.3f} N + {fit['intercept']:.3f}  (R2={fit['r2']:.4f}, {fit['points']} points)")
