"""Deterministic generators for self-similar graph families and controls.

Each generator returns a :class:`~anomwalk.graph.WeightedGraph` with unit
weights, lexicographically ordered vertex numbering and a designated boundary
set.  The boundary is the set of vertices through which the finite piece
would attach to the rest of the infinite graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import build_graph, volume_profile

FAMILIES = ("sierpinski_gasket", "vicsek_tree", "lattice_box", "cycle", "path")
DEFAULT_VERTEX_BUDGET = 50_000


class BudgetError(ValueError):
    def __init__(self, predicted, budget):
        super().__init__(f"predicted vertex count {predicted} exceeds budget {budget}")
        self.predicted = predicted


@dataclass(frozen=True)
class FamilySpec:
    """Which graph to build.

    ``level_or_size`` is the recursion level for the fractals, the side
    length (vertices per axis) for lattice boxes, the vertex count for
    cycles and the edge count for paths.
    """

    family: str
    level_or_size: int
    dimension: int = 1
    perturb_seed: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        lo = 0 if self.family in ("sierpinski_gasket", "vicsek_tree") else 1
        if self.family == "cycle":
            lo = 3
        if int(self.level_or_size) < lo:
            raise ValueError(f"{self.family} needs level_or_size >= {lo}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")


def predicted_vertex_count(spec):
    L = spec.level_or_size
    if spec.family == "sierpinski_gasket":
        return (3 ** (L + 1) + 3) // 2
    if spec.family == "vicsek_tree":
        return 4 * 5**L + 1
    if spec.family == "lattice_box":
        return L**spec.dimension
    if spec.family == "cycle":
        return L
    return L + 1


def generate(spec, budget=DEFAULT_VERTEX_BUDGET):
    """Build the graph described by ``spec``.

    Raises
    ------
    BudgetError
        If the predicted vertex count exceeds ``budget``.
    """
    count = predicted_vertex_count(spec)
    if count > budget:
        raise BudgetError(count, budget)
    L = spec.level_or_size
    if spec.family == "sierpinski_gasket":
        coords, edges, boundary = _gasket(L)
        name = f"sierpinski_gasket L={L}"
    elif spec.family == "vicsek_tree":
        coords, edges, boundary = _vicsek(L)
        name = f"vicsek_tree L={L}"
    elif spec.family == "lattice_box":
        coords, edges, boundary = _lattice(L, spec.dimension)
        name = f"lattice_box side={L} d={spec.dimension}"
    elif spec.family == "cycle":
        coords = np.arange(L)[:, None]
        edges = [(i, (i + 1) % L) for i in range(L)]
        boundary = []
        name = f"cycle n={L}"
    else:
        coords = np.arange(L + 1)[:, None]
        edges = [(i, i + 1) for i in range(L)]
        boundary = [0, L]
        name = f"path n={L}"
    weights = np.ones(len(edges))
    if spec.perturb_seed is not None:
        weights = perturbation_weights(len(edges), spec.perturb_seed)
        name += f" perturbed(seed={spec.perturb_seed})"
    triples = [(a, b, w) for (a, b), w in zip(edges, weights)]
    return build_graph(triples, n=len(coords), boundary=boundary, name=name, coords=coords)


def perturbation_weights(m, seed):
    """Independent multipliers in ``[1/2, 2]`` (log-uniform), reproducible by seed."""
    rng = np.random.default_rng(seed)
    return np.exp(rng.uniform(-math.log(2.0), math.log(2.0), size=m))


def _relabel(coord_edges, boundary_coords):
    pts = sorted({p for e in coord_edges for p in e})
    index = {p: i for i, p in enumerate(pts)}
    edges = sorted({tuple(sorted((index[a], index[b]))) for a, b in coord_edges})
    boundary = sorted(index[p] for p in boundary_coords)
    return np.array(pts), edges, boundary


def _gasket(level):
    # triangular-lattice coordinates (i, j); level L has side 2**L
    edges = {((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (0, 1))}
    for k in range(level):
        s = 2**k
        new = set()
        for di, dj in ((0, 0), (s, 0), (0, s)):
            for (a, b), (c, d) in edges:
                new.add(((a + di, b + dj), (c + di, d + dj)))
        edges = new
    side = 2**level
    return _relabel(edges, [(0, 0), (side, 0), (0, side)])


def _vicsek(level):
    # diagonal crosses; level L spans [-3**L, 3**L]^2
    edges = {((0, 0), (sx, sy)) for sx in (-1, 1) for sy in (-1, 1)}
    for k in range(level):
        s = 3**k
        new = set()
        shifts = [(0, 0)] + [(2 * s * sx, 2 * s * sy) for sx in (-1, 1) for sy in (-1, 1)]
        for dx, dy in shifts:
            for (a, b), (c, d) in edges:
                new.add(((a + dx, b + dy), (c + dx, d + dy)))
        edges = new
    s = 3**level
    return _relabel(edges, [(sx * s, sy * s) for sx in (-1, 1) for sy in (-1, 1)])


def _lattice(side, dim):
    shape = (side,) * dim
    idx = np.arange(side**dim).reshape(shape)
    edges = []
    for ax in range(dim):
        a = np.take(idx, range(side - 1), axis=ax).ravel()
        b = np.take(idx, range(1, side), axis=ax).ravel()
        edges.extend(zip(a.tolist(), b.tolist()))
    edges.sort()
    coords = np.array(np.unravel_index(np.arange(side**dim), shape)).T
    on_shell = np.any((coords == 0) | (coords == side - 1), axis=1)
    return coords, edges, np.flatnonzero(on_shell).tolist()


def expected_exponents(spec):
    """Reference ``(alpha, gamma)`` for the family.

    Lattice boxes give ``(d, 2)``, the gasket ``(log 3/log 2, log 5/log 2)``
    and the Vicsek tree ``(log 5/log 3, 1 + log 5/log 3)``.  Cycles and paths
    return ``None``; treat a path as ``lattice_box`` with ``dimension=1``.
    """
    fam = spec.family if isinstance(spec, FamilySpec) else spec
    if fam == "lattice_box":
        return float(spec.dimension), 2.0
    if fam == "sierpinski_gasket":
        return math.log(3) / math.log(2), math.log(5) / math.log(2)
    if fam == "vicsek_tree":
        a = math.log(5) / math.log(3)
        return a, 1.0 + a
    return None


def gasket_corners(level):
    """Vertex ids of the three corners of the level-``level`` gasket."""
    return generate(FamilySpec("sierpinski_gasket", level)).boundary


def reference_profile(g, family=None):
    """Volume profile used by the checks.

    For the gasket the ball around the origin corner (vertex 0) is used: it
    coincides with balls of the one-sided infinite gasket up to the side
    length, so the profile stays exact past the boundary-safe window.  Other
    families use the median convention.
    """
    fam = family or g.name.split(" ")[0]
    if fam == "sierpinski_gasket":
        return volume_profile(g, base="fixed", base_vertex=0)
    return volume_profile(g, base="median")
