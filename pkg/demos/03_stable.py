"""Discrete-stable subordination: weights, tails and the subordinated kernel.

Run with ``python3 demos/03_stable.py``.
"""

import math

import numpy as np

from anomwalk import FamilySpec, generate, lazy_pair, natural_walk, stable_kernel
from anomwalk.graph import fit_loglog_slope
from anomwalk.stable import discrete_stable_pmf, monte_carlo_check, tail_series

print("1. weights A(t, i) for t = 2")
for beta0 in (0.3, 0.5, 0.7):
    w = discrete_stable_pmf(2.0, beta0, 4096)
    i = np.arange(32, 513)
    slope, _ = fit_loglog_slope(i, w.pmf[i])
    print(f"   beta0 {beta0}: A(0) = {w.pmf[0]:.5f}, tail slope {slope:.3f} "
          f"(expect {-1 - beta0:.1f}), tail past 4096 = {w.tail_mass:.3e} "
          f"(series {tail_series(2.0, beta0, 4096):.3e})")

print("\n2. Monte Carlo of N(S(t)) against the recurrence")
for beta0 in (0.3, 0.7):
    stat, p, bins = monte_carlo_check(1.0, beta0, samples=200_000, seed=1)
    print(f"   beta0 {beta0}: chi2 {stat:.1f} on {bins} bins, p = {p:.3f}")

print("\n3. subordinated kernel on the gasket, level 4")
g = generate(FamilySpec("sierpinski_gasket", 4))
Q = lazy_pair(natural_walk(g))
for t in (0.5, 2.0, 8.0):
    K = stable_kernel(Q, t, 0.6)
    C = stable_kernel(Q, t, 0.6, method="closed_form")
    diag = np.diag(K.dense()) * K.measure
    print(f"   t {t:4}: truncation {K.flags.truncation}, folded tail {K.flags.tail_mass:.2e}, "
          f"mean return prob {diag.mean():.4f}, "
          f"max |mixture - closed form| {np.abs(K.dense() - C.dense()).max():.1e}")
print(f"\n   beta = beta0 * gamma = {0.6 * math.log2(5):.3f} for beta0 = 0.6")
