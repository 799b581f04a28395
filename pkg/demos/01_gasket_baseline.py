"""Volume growth, resistance and walk dimension on the Sierpinski gasket.

Run with ``python3 demos/01_gasket_baseline.py``.
"""

import math

import numpy as np

from anomwalk import FamilySpec, generate, resistance, volume_profile
from anomwalk.families import gasket_corners
from anomwalk.graph import fit_loglog_slope


def section(title):
    print()
    print(title)
    print("-" * len(title))


section("1. graphs")
for L in range(2, 7):
    g = generate(FamilySpec("sierpinski_gasket", L))
    print(f"level {L}: {g.n:5d} vertices, {g.num_edges:5d} edges, diameter {g.diameter()}")

section("2. volume growth around the origin corner")
g = generate(FamilySpec("sierpinski_gasket", 6))
V = volume_profile(g, base="fixed", base_vertex=0)
r = np.array([2.0**k for k in range(1, 6)])
slope, _ = fit_loglog_slope(r, V(r))
print("r    :", r.astype(int).tolist())
print("V(r) :", V(r).astype(int).tolist())
print(f"fitted alpha {slope:.4f}   log3/log2 = {math.log2(3):.4f}")

section("3. corner to corner resistance")
prev = None
for L in range(0, 7):
    a, b, _ = gasket_corners(L)
    R = resistance(generate(FamilySpec("sierpinski_gasket", L)), [a], [b])
    step = f"  ratio {R / prev:.6f}" if prev else ""
    print(f"level {L}: R = {R:.6f}{step}")
    prev = R

section("4. walk dimension")
# V doubles by 3 and R by 5/3 per level, so gamma = log2(3 * 5/3) = log2 5
print(f"gamma = alpha + log2(5/3) = {math.log2(3) + math.log2(5 / 3):.6f} = log2 5 = {math.log2(5):.6f}")
