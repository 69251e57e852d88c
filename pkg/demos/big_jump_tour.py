"""Conditioning a negatively drifted walk to stay above -x and end low.

The walk does so by one large jump early on.  This script samples the
conditioned law by importance sampling and looks at where and how large
the jump is.

Run: python3 demos/big_jump_tour.py   (about a minute)
"""
import math

import numpy as np

from bigjump import dist, renewal
from bigjump.rare import decomposition as dc
from bigjump.rare import importance as im
from bigjump.rare import theorem

law = dist.make_shifted_pareto(3, 1, 1)
n, x, T = 100, 5.0, 0.0
event = im.EventSpec(n, x, T)

# %% Event probability against the renewal-function asymptotics.
table = renewal.tabulate(law, renewal.default_grid(extent=25), reps=50_000, rng=1)
(rec,) = theorem.theorem1_check(law, event, table, reps=300_000, rng=2)
print(f"P(event) = {rec.lhs:.3e} +- {rec.lhs_stderr:.1e}; asymptotic {rec.rhs:.3e}; ratio {rec.ratio:.3f}")

# %% A conditioned sample, reused below.
th = dc.pi_theoretical(law, x, reps=100_000, rng=3)
cfg = im.default_config(law, n, x, J_max=max(20, th.J_max), rng=4)
sample = dc.collect(law, event, cfg, 1_000_000, 5, probes=dc.default_probes(), j=1)
print(f"effective conditioned sample size: {sample.ess:.0f}")

# %% When does the jump happen?
pi = dc.pi_distribution(law, x, T, n, sample=sample, theory=th)
for j in range(1, 6):
    print(f"  jump at step {j}: empirical {pi.pi_empirical[j - 1]:.3f}, limit {th.pi[j - 1]:.3f}")
print(f"TV distance over the first ten steps: {pi.tv:.3f}")

# %% How big is it?  Centered at a n, spread of order sqrt(n).
z, w = dc.jump_size_values(sample)
m = np.sum(w * z) / np.sum(w)
v = np.sum(w * (z - m) ** 2) / np.sum(w)
print(f"(X - a n)/sqrt(n): weighted mean {m:.3f}, variance {v:.3f} (limit 0, {law.sigma2})")
print(f"KS p-value against the Gaussian limit: {dc.jump_size_test(law, x, T, n, sample=sample).ks.pvalue:.2g}")

# %% Only one jump.
d = dc.single_jump_diagnostics(law, event, sample=sample).diagnostics
print(f"second step above a n/8: {d['second_big_step']['conditional']:.4f}")
print(f"no step above a n/8:     {d['no_big_step']['conditional']:.4f}")

# %% Before and after the jump.
rep = dc.decomposition_test(law, x, T, n, j=1, sample=sample, factor_reps=100_000, rng=6)
for row in rep.probes:
    print(f"  {row['probe']:>20}: joint {row['joint']:.4f}, product {row['pre_factor'] * row['post_factor']:.4f},"
          f" z={row['z']:.2f}")
mu = dc.mu_theta(law, x, T, reps=50_000, rng=7)
print(f"theta = {mu.theta:.4f} (closed-form per path: {mu.theta_exact:.4f} +- {mu.theta_stderr:.4f})")
