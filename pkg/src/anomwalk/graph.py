"""Weighted graphs, hop distances, balls and volume profiles.

Vertices are the integers ``0..n-1``.  Edge weights are symmetric and
strictly positive; the vertex measure is ``mu(x) = sum_y mu_xy``.  Distances
are hop counts, independent of the weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Raised for malformed or disconnected graph input."""


class UnsafeWindowError(ValueError):
    """Raised when a requested radius or time leaves the boundary-safe window."""

    def __init__(self, message, safe_bound):
        super().__init__(message)
        self.safe_bound = safe_bound


class WeightedGraph:
    """Connected, locally finite weighted graph.

    Parameters
    ----------
    n : int
        Number of vertices.
    u, v : (m,) int arrays
        Edge endpoints with ``u < v``, sorted lexicographically.
    w : (m,) float array
        Positive edge weights ``mu_uv``.
    boundary : iterable of int, optional
        Designated boundary vertices.  Asymptotic measurements only use base
        points far from this set.
    name : str, optional
        Free-form label, e.g. ``"sierpinski_gasket L=5"``.
    coords : (n, k) array, optional
        Embedding coordinates kept by the generators; never used for distances.
    """

    def __init__(self, n, u, v, w, boundary=(), name="", coords=None):
        self.n = int(n)
        self.u = np.asarray(u, dtype=np.int64)
        self.v = np.asarray(v, dtype=np.int64)
        self.w = np.asarray(w, dtype=float)
        self.boundary = tuple(sorted(int(b) for b in boundary))
        self.name = name
        self.coords = coords
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        vals = np.concatenate([self.w, self.w])
        self.adjacency = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        self.adjacency.sum_duplicates()
        self.measure = np.asarray(self.adjacency.sum(axis=1)).ravel()
        self._dist_cache = {}
        self._all_dist = None

    # -- basic queries -------------------------------------------------
    @property
    def num_edges(self):
        return len(self.w)

    @property
    def total_measure(self):
        return float(self.measure.sum())

    def edges(self):
        """Iterate over ``(u, v, weight)`` in the stored (sorted) order."""
        return zip(self.u.tolist(), self.v.tolist(), self.w.tolist())

    def degrees(self):
        return np.diff(self.adjacency.indptr)

    def neighbors(self, x):
        lo, hi = self.adjacency.indptr[x], self.adjacency.indptr[x + 1]
        return self.adjacency.indices[lo:hi]

    def is_tree(self):
        return self.num_edges == self.n - 1

    def is_bipartite(self):
        d = self.distances_from(0)
        return bool(np.all((d[self.u] + d[self.v]) % 2 == 1))

    def _check_vertex(self, x):
        if not 0 <= x < self.n:
            raise IndexError(f"vertex {x} outside 0..{self.n - 1}")

    # -- distances -----------------------------------------------------
    def distances_from(self, x):
        """Hop distances from ``x`` to every vertex (BFS, cached per source)."""
        x = int(x)
        self._check_vertex(x)
        if self._all_dist is not None:
            return self._all_dist[x]
        d = self._dist_cache.get(x)
        if d is None:
            d = csgraph.shortest_path(
                self.adjacency, method="D", unweighted=True, indices=x
            ).astype(np.int64)
            d.setflags(write=False)
            self._dist_cache[x] = d
        return d

    def distance_matrix(self):
        """All-pairs hop distances as an ``(n, n)`` int32 array (cached)."""
        if self._all_dist is None:
            dm = csgraph.shortest_path(self.adjacency, method="D", unweighted=True)
            dm = dm.astype(np.int32)
            dm.setflags(write=False)
            self._all_dist = dm
        return self._all_dist

    def diameter(self):
        return int(self.distance_matrix().max())

    def boundary_distance(self):
        """Hop distance from each vertex to the designated boundary set.

        Graphs without a boundary (e.g. cycles) get ``inf`` everywhere.
        """
        if not self.boundary:
            return np.full(self.n, np.inf)
        d = csgraph.shortest_path(
            self.adjacency, method="D", unweighted=True, indices=list(self.boundary)
        )
        return np.atleast_2d(d).min(axis=0)

    def interior(self, margin):
        """Vertices whose distance to the boundary exceeds ``margin``."""
        return np.flatnonzero(self.boundary_distance() > margin)

    def safe_radius(self):
        """Largest radius ``r`` admitting an interior base point and ``r <= diam/4``."""
        bd = self.boundary_distance()
        cap = self.diameter() / 4.0
        if np.isinf(bd).all():
            return float(np.floor(cap))
        return float(min(np.floor(cap), bd.max() - 1))

    def ball(self, x, r):
        return np.flatnonzero(self.distances_from(x) <= r)

    def __repr__(self):
        return f"WeightedGraph({self.name!r}, n={self.n}, m={self.num_edges})"


def build_graph(edge_list, n=None, boundary=(), name="", coords=None):
    """Build a :class:`WeightedGraph` from ``(u, v, weight)`` triples.

    Parallel entries for the same unordered pair are merged by summing their
    weights.  Self-loops are rejected.

    Raises
    ------
    GraphError
        On empty input, nonpositive weights, self-loops or a disconnected
        result (the message lists the component sizes).
    """
    edges = list(edge_list)
    if not edges:
        raise GraphError("edge list is empty")
    arr = np.array([(int(a), int(b), float(c)) for a, b, c in edges], dtype=float)
    a = arr[:, 0].astype(np.int64)
    b = arr[:, 1].astype(np.int64)
    w = arr[:, 2]
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        bad = int(np.flatnonzero(~(w > 0))[0]) if np.any(~(w > 0)) else 0
        raise GraphError(f"edge {edges[bad][:2]} has nonpositive weight {w[bad]}")
    if np.any(a == b):
        raise GraphError("self-loop edges are not allowed")
    if np.any(a < 0) or np.any(b < 0):
        raise GraphError("vertices must be nonnegative integers")
    if n is None:
        n = int(max(a.max(), b.max())) + 1
    elif max(a.max(), b.max()) >= n:
        raise GraphError(f"edge endpoint exceeds declared vertex count {n}")
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    keep = np.ones(len(lo), dtype=bool)
    keep[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    starts = np.flatnonzero(keep)
    w = np.add.reduceat(w, starts)
    lo, hi = lo[starts], hi[starts]
    adj = sp.csr_matrix((np.ones(len(lo)), (lo, hi)), shape=(n, n))
    ncomp, labels = csgraph.connected_components(adj, directed=False)
    if ncomp > 1:
        sizes = np.bincount(labels)
        raise GraphError(
            f"graph is disconnected: {ncomp} components of sizes {sorted(sizes.tolist(), reverse=True)}"
        )
    return WeightedGraph(n, lo, hi, w, boundary=boundary, name=name, coords=coords)


def distances_from(g, x):
    return g.distances_from(x)


def ball_volume(g, x, r):
    """``V_mu(x, r) = mu(B(x, r))`` with hop-distance balls."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    d = g.distances_from(x)
    return float(g.measure[d <= r].sum())


def ball_volumes(g, x, r_max):
    """Vector ``[V(x,0), ..., V(x,r_max)]`` from one BFS."""
    d = g.distances_from(x)
    counts = np.bincount(np.minimum(d, r_max + 1), weights=g.measure, minlength=r_max + 2)
    return np.cumsum(counts[: r_max + 1])


def ball_average(g, f, R):
    """mu-average of ``f`` over ``B(x, R)`` for every ``x``.

    For ``R < 1`` the ball is the single vertex, so ``f`` is returned unchanged.
    """
    f = np.asarray(f, dtype=float)
    if R < 1:
        return f.copy()
    D = g.distance_matrix()
    inside = D <= R
    num = inside @ (f * g.measure)
    den = inside @ g.measure
    return num / den


@dataclass(frozen=True)
class VolumeProfile:
    """Reference volume function ``V`` on ``[0, inf)``.

    Integer-radius table, linear interpolation in between.  Past the end of
    the table ``V`` continues as a power law with the exponent fitted on the
    upper half of the table, so it stays continuous and strictly increasing.
    """

    radii: np.ndarray
    values: np.ndarray
    base: str
    base_vertex: int | None = None
    tail_exponent: float = 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        rmax = self.radii[-1]
        inside = np.interp(np.minimum(r, rmax), self.radii, self.values)
        outside = self.values[-1] * (np.maximum(r, rmax) / rmax) ** self.tail_exponent
        out = np.where(r <= rmax, inside, outside)
        return out if out.ndim else float(out)

    def inverse(self, v):
        """Smallest ``r >= 0`` with ``V(r) = v``; values below ``V(0)`` map to 0."""
        v = np.asarray(v, dtype=float)
        vmax = self.values[-1]
        inside = np.interp(np.minimum(v, vmax), self.values, self.radii)
        outside = self.radii[-1] * (np.maximum(v, vmax) / vmax) ** (1.0 / self.tail_exponent)
        out = np.where(v <= vmax, inside, outside)
        return out if out.ndim else float(out)

    @property
    def r_max(self):
        return int(self.radii[-1])


def volume_profile(g, base="median", base_vertex=None, r_max=None):
    """Volume profile ``V(r)`` of a graph.

    Parameters
    ----------
    g : WeightedGraph
    base : {"median", "fixed"}
        ``"median"`` takes, for each ``r``, the median of ``V_mu(x, r)`` over
        vertices at distance ``> r`` from the boundary.  ``"fixed"`` uses the
        single vertex ``base_vertex`` for every radius.
    base_vertex : int, optional
        Required for ``base="fixed"``.
    r_max : int, optional
        Last tabulated radius.  Defaults to the largest radius for which an
        interior vertex exists (median) or the eccentricity of the base vertex
        (fixed).

    Returns
    -------
    VolumeProfile
    """
    if base == "fixed":
        if base_vertex is None:
            raise ValueError("fixed base convention needs base_vertex")
        ecc = int(g.distances_from(base_vertex).max())
        top = ecc if r_max is None else min(int(r_max), ecc)
        vals = ball_volumes(g, base_vertex, top)
    elif base == "median":
        D = g.distance_matrix()
        bd = g.boundary_distance()
        top = int(min(bd.max() - 1, D.max())) if np.isfinite(bd.max()) else int(D.max())
        if r_max is not None:
            top = min(top, int(r_max))
        if top < 1:
            # too small for an interior: median over all vertices instead
            top = int(D.max()) if r_max is None else min(int(D.max()), int(r_max))
            bd = np.full(g.n, np.inf)
        top = max(top, 0)
        order = np.argsort(bd, kind="stable")
        vals = np.empty(top + 1)
        # cumulative ball masses for all vertices at once
        cum = _all_ball_volumes(g, top)
        for r in range(top + 1):
            idx = np.flatnonzero(bd > r)
            if len(idx) == 0:
                idx = order[-1:]
            vals[r] = np.median(cum[idx, r])
    else:
        raise ValueError(f"unknown base convention {base!r}")
    # keep the strictly increasing prefix
    inc = np.flatnonzero(np.diff(vals) <= 0)
    if len(inc):
        vals = vals[: inc[0] + 1]
    radii = np.arange(len(vals), dtype=float)
    if len(vals) >= 3:
        half = radii[len(radii) // 2 :]
        half = half[half > 0]
        if len(half) >= 2:
            slope = np.polyfit(np.log(half), np.log(vals[half.astype(int)]), 1)[0]
        else:
            slope = 1.0
    else:
        slope = 1.0
    slope = max(float(slope), 1e-3)
    return VolumeProfile(radii, vals, base, base_vertex, slope)


def _all_ball_volumes(g, r_max):
    D = g.distance_matrix()
    out = np.zeros((g.n, r_max + 1))
    for x in range(g.n):
        counts = np.bincount(
            np.minimum(D[x], r_max + 1), weights=g.measure, minlength=r_max + 2
        )
        out[x] = np.cumsum(counts[: r_max + 1])
    return out


@dataclass
class GraphDiagnostics:
    """Measured constants of the standing volume assumptions."""

    C_mu: float
    C_D: float
    C_h: float
    p0: float
    alpha_fit: float
    reverse_doubling: tuple
    r_grid: list = field(default_factory=list)
    base: str = "median"

    def as_dict(self):
        return {
            "C_mu": self.C_mu,
            "C_D": self.C_D,
            "C_h": self.C_h,
            "p0": self.p0,
            "alpha_fit": self.alpha_fit,
            "reverse_doubling": {"A": self.reverse_doubling[0], "c1": self.reverse_doubling[1]},
            "r_grid": list(self.r_grid),
            "base": self.base,
        }


def fit_loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x`` and its standard error."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if len(lx) < 2:
        raise ValueError("need at least two points for a slope")
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    if len(lx) > 2:
        resid = ly - A @ coef
        s2 = resid @ resid / (len(lx) - 2)
        cov = s2 * np.linalg.inv(A.T @ A)
        stderr = float(np.sqrt(cov[0, 0]))
    else:
        stderr = 0.0
    return float(coef[0]), stderr


def diagnostics(g, r_grid, profile=None, A=2):
    """Measure ``C_mu, C_D, C_h, p0``, the volume exponent and reverse doubling.

    ``r_grid`` must lie in the boundary-safe window: every radius (and ``A*r``
    for the reverse-doubling probe) must admit interior base points and stay
    below a quarter of the diameter.
    """
    r_grid = sorted(float(r) for r in r_grid)
    if not r_grid or r_grid[0] <= 0:
        raise ValueError("r_grid must contain positive radii")
    safe = g.safe_radius()
    if r_grid[-1] > safe:
        raise UnsafeWindowError(
            f"radius {r_grid[-1]} exceeds boundary-safe bound {safe}", safe
        )
    if profile is None:
        profile = volume_profile(g)
    mu = g.measure
    C_mu = float(max(mu.max(), 1.0 / mu.min()))
    P_edge = g.w / mu[g.u]
    P_edge2 = g.w / mu[g.v]
    p0 = float(min(P_edge.min(), P_edge2.min()))

    r_int = [int(np.floor(r)) for r in r_grid]
    top = max(r_int)
    base = g.interior(top)
    vols = np.array([ball_volumes(g, x, A * top + 1) for x in base])
    Vr = np.array([profile(r) for r in r_grid])
    V2r = np.array([profile(2 * r) for r in r_grid])
    C_D = float(np.max(V2r / Vr))
    local = vols[:, r_int]
    C_h = float(max(np.max(local / Vr), np.max(Vr / local)))
    alpha_fit, _ = fit_loglog_slope(r_grid, Vr)
    # reverse doubling on radii >= 1/2 (integer radii: r >= 1)
    rd = [r for r in r_int if r >= 1 and A * r <= A * top]
    annulus = vols[:, [A * r for r in rd]] - vols[:, rd]
    c1 = float(np.min(annulus / np.array([profile(r) for r in rd]))) if rd else float("nan")
    return GraphDiagnostics(C_mu, C_D, C_h, p0, alpha_fit, (A, c1), r_grid, profile.base)


# -- interchange file ----------------------------------------------------
def write_graph(g, path):
    """Write the plain-text interchange format (``vertices N`` + ``u v w`` lines)."""
    with open(path, "w") as fh:
        fh.write(format_graph(g))


def format_graph(g):
    lines = [f"vertices {g.n}"]
    lines += [f"{a} {b} {w!r}" for a, b, w in g.edges()]
    return "\n".join(lines) + "\n"


def read_graph(path, boundary=()):
    with open(path) as fh:
        return parse_graph(fh.read(), boundary=boundary)


def parse_graph(text, boundary=()):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("vertices"):
        raise GraphError("missing 'vertices N' header")
    n = int(lines[0].split()[1])
    edges = []
    for ln in lines[1:]:
        a, b, w = ln.split()
        edges.append((int(a), int(b), float(w)))
    return build_graph(edges, n=n, boundary=boundary)
