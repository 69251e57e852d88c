"""Ladder-height renewal functions for the canonical walk.

Run: python3 demos/renewal_tour.py
"""
import math

import numpy as np

from bigjump import dist, renewal

law = dist.make_shifted_pareto(3, 1, 1)
print(f"step law: beta={law.beta}, shift={law.shift}, sigma2={law.sigma2:.3f}")

# %% U and V on a grid.  Both start at exactly 1 and grow roughly linearly.
table = renewal.tabulate(law, renewal.default_grid(extent=25), reps=50_000, rng=1)
for x in (0.0, 1.0, 5.0, 10.0, 20.0):
    i = int(np.searchsorted(table.grid, x))
    print(f"x={x:5.1f}  U={table.U.values[i]:7.3f} +- {table.U.stderr[i]:.3f}"
          f"   V={table.V.values[i]:.4f} +- {table.V.stderr[i]:.4f}")
print(f"truncation: K_U={table.U.K}, K_V={table.V.K}; V is bounded by {table.V_bound:.4f}")

# %% The constant D from the first-passage tail.
D = renewal.estimate_D(law, reps=50_000, rng=2)
print(f"D = {D.value:.4f} +- {D.stderr:.4f} (K={D.K}, terms decay like k^-{D.tail_exponent:.2f})")
for n in (50, 100, 200):
    print(f"  predicted P(tau > {n}) ~ {math.exp(D.value) * law.tail(law.a * n):.3e}")

# %% Two routes to the Laplace constants agree.
for lc in renewal.laplace_K(law, [0.5, 1.0, 2.0], table, reps=100_000, rng=3):
    print(f"lambda={lc.lam}: K1 {lc.K1_series:.4f} vs {lc.K1_integral:.4f} (z={lc.z_score(1):.2f}), "
          f"K2 {lc.K2_series:.4f} vs {lc.K2_integral:.4f} (z={lc.z_score(2):.2f})")
