"""Measured constants for the functional inequalities on the gasket.

Each check returns a report with the measured constants and a pass flag.
Run with ``python3 demos/04_inequalities.py``.
"""

import math

from anomwalk import EtaZeta, FamilySpec, JumpProfile, generate, jump_kernel, reference_profile
from anomwalk import verify as vf

GAMMA = math.log2(5)

g = generate(FamilySpec("sierpinski_gasket", 5))
V = reference_profile(g)
K = jump_kernel(g, JumpProfile(1.5), V)
ez = EtaZeta(JumpProfile(1.5), GAMMA, eta_max=1e6)
fam = vf.test_functions(K, radii=(1, 2, 4))
print(f"{len(fam)} test functions on a gasket with {g.n} vertices")

reports = [
    vf.check_dircomp(K, [f for _, f in fam]),
    vf.check_noninc(K, [f for _, f in fam]),
    vf.verify_pseudo_poincare(K, ez, [1, 2, 4, 8], fam),
    vf.verify_nash(K, ez, V, fam),
    vf.verify_resistance_band(g, GAMMA, [1, 2, 4], V, samples=6),
    vf.verify_subgaussian(g, "P_pair", GAMMA, V, n_grid=[2, 8, 32]),
]
for rep in reports:
    band = f" band {rep.band['max'] / rep.band['min']:.2f}" if rep.band else ""
    print(f"{rep.inequality_id:16s} {'PASS' if rep.passed else 'FAIL'}  "
          f"violations {rep.violations}{band}")
sg = reports[-1].constants
print(f"sub-Gaussian constants: C_upper {sg['C_upper']:.3f}, c_lower {sg['c_lower']:.4f}")
