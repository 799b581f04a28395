"""Long range random walks on graphs with sub-Gaussian heat kernels.

Graph families, Markov kernels (natural, lazy, jump, subordinated, stable),
the ``eta``/``zeta`` decay clock and measured-constant verification of the
associated functional inequalities.
"""

from .asymptotics import EtaZeta, JumpProfile, eta_le_phi_check, rv_index_fit
from .families import FamilySpec, expected_exponents, generate, reference_profile
from .graph import (
    GraphError,
    UnsafeWindowError,
    VolumeProfile,
    WeightedGraph,
    ball_average,
    ball_volume,
    build_graph,
    diagnostics,
    distances_from,
    volume_profile,
)
from .operators import (
    MarkovKernel,
    dirichlet,
    jump_kernel,
    kernel_row,
    lazy_pair,
    moment,
    natural_walk,
    power_apply,
    psi,
    resistance,
    subordinated_kernel,
)
from .stable import discrete_stable_pmf, evidence_band_check, poisson_volume_bound_check, stable_kernel
from .verify import ConstantReport

__version__ = "0.1.0"
