"""Markov operators symmetric with respect to the vertex measure.

A :class:`MarkovKernel` stores the kernel ``k(x, y)`` with respect to ``mu``,
so the operator acts by ``Kf(x) = sum_y k(x, y) f(y) mu(y)`` and the one-step
transition probability is ``k(x, y) mu(y)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .graph import WeightedGraph, ball_average  # noqa: F401  (re-exported)
from .solvers import pcg


@dataclass
class KernelFlags:
    """Diagnostics attached to a constructed kernel."""

    p0: float | None = None
    C_phi: float | None = None
    Z: float | None = None
    c_phi: float | None = None
    truncation: int | None = None
    tail_mass: float | None = None
    short_truncation: bool = False
    incomplete: bool = False


class MarkovKernel:
    """Symmetric, stochastic kernel with respect to a vertex measure.

    Parameters
    ----------
    k : (n, n) ndarray or scipy.sparse matrix
        Kernel values; must be exactly symmetric.
    measure : (n,) ndarray
        The reference measure ``mu``.
    label : str
        Provenance tag (``"P"``, ``"Q"``, ``"jump(...)"``, ...).
    """

    def __init__(self, k, measure, label, graph=None, flags=None):
        self.k = k
        self.measure = np.asarray(measure, dtype=float)
        self.label = label
        self.graph = graph
        self.flags = flags or KernelFlags()
        self._eig = None

    @property
    def size(self):
        return len(self.measure)

    @property
    def is_sparse(self):
        return sp.issparse(self.k)

    def dense(self):
        return self.k.toarray() if self.is_sparse else np.asarray(self.k)

    def transition_matrix(self):
        """Row-stochastic matrix ``k(x, y) mu(y)``."""
        if self.is_sparse:
            return self.k @ sp.diags(self.measure)
        return self.k * self.measure[None, :]

    def apply(self, f):
        """``K f``; ``f`` may be a vector or an ``(n, b)`` block of columns."""
        f = np.asarray(f, dtype=float)
        mf = f * (self.measure if f.ndim == 1 else self.measure[:, None])
        return np.asarray(self.k @ mf)

    def symmetrized(self):
        """``S = D^{1/2} k D^{1/2}`` (same spectrum as the operator)."""
        s = np.sqrt(self.measure)
        return self.dense() * s[:, None] * s[None, :]

    def eig(self):
        """Eigenpairs of the symmetrized operator, ascending (cached)."""
        if self._eig is None:
            lam, U = np.linalg.eigh(self.symmetrized())
            self._eig = (lam, U)
        return self._eig

    def row_sums(self):
        return np.asarray(self.k @ self.measure).ravel()

    def check(self, tol=1e-12):
        """Return ``(asymmetry, max |row mass - 1|, min entry)``."""
        K = self.dense()
        return (
            float(np.abs(K - K.T).max()),
            float(np.abs(self.row_sums() - 1.0).max()),
            float(K.min()),
        )

    def __repr__(self):
        return f"MarkovKernel({self.label!r}, n={self.size})"


def _finalize(K, measure):
    """Symmetrize, clip round-off negatives and absorb the row defect on the diagonal."""
    K = 0.5 * (K + K.T)
    np.maximum(K, 0.0, out=K)
    defect = 1.0 - K @ measure
    K[np.diag_indices_from(K)] += defect / measure
    return K


def identity_kernel(measure, label="I"):
    measure = np.asarray(measure, dtype=float)
    return MarkovKernel(sp.diags(1.0 / measure).tocsr(), measure, label)


def natural_walk(g):
    """Natural random walk ``P(x, y) = mu_xy / mu(x)`` in kernel form.

    ``flags.p0`` holds the smallest transition probability along an edge.
    """
    mu = g.measure
    A = g.adjacency.tocoo()
    vals = A.data / (mu[A.row] * mu[A.col])
    k = sp.csr_matrix((vals, (A.row, A.col)), shape=A.shape)
    p0 = float(np.min(A.data / mu[A.row]))
    return MarkovKernel(k, mu, "P", graph=g, flags=KernelFlags(p0=p0))


def lazy_pair(P):
    """``Q = (P + P^2) / 2``."""
    if P.is_sparse:
        T = P.transition_matrix()
        T2 = T @ T
        Qt = 0.5 * (T + T2)
        k = (Qt @ sp.diags(1.0 / P.measure)).tocsr()
        k = 0.5 * (k + k.T)
    else:
        K = P.dense()
        K2 = K @ (K * P.measure[:, None])
        k = 0.5 * (K + K2)
        k = 0.5 * (k + k.T)
    return MarkovKernel(k, P.measure, "Q", graph=P.graph)


def power_apply(K, n, f):
    """``K^n f`` by ``n`` successive applications."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = np.array(f, dtype=float, copy=True)
    for _ in range(int(n)):
        out = K.apply(out)
    return out


def indicator(K, x):
    """Normalized indicator ``1_x / mu(x)``."""
    e = np.zeros(K.size)
    e[x] = 1.0 / K.measure[x]
    return e


def kernel_row(K, n, x):
    """``k_n(x, .)`` computed as ``K^n (1_x / mu(x))``."""
    return power_apply(K, n, indicator(K, x))


def matrix_power_kernel(K, n):
    """Dense kernel of ``K^n`` from repeated squaring of the transition matrix."""
    T = np.asarray(K.transition_matrix().toarray() if K.is_sparse else K.transition_matrix())
    Tn = np.linalg.matrix_power(T, int(n))
    return Tn / K.measure[None, :]


def spectral_kernel(K, fn, label, graph=None, flags=None):
    """Kernel of ``fn(K)`` for a real function of the spectrum.

    ``fn`` receives the eigenvalue array and must return the transformed
    eigenvalues.  The result is cleaned to be exactly symmetric and stochastic.
    """
    lam, U = K.eig()
    s = 1.0 / np.sqrt(K.measure)
    F = (U * fn(lam)[None, :]) @ U.T
    F = F * s[:, None] * s[None, :]
    F = _finalize(F, K.measure)
    return MarkovKernel(F, K.measure, label, graph=graph or K.graph, flags=flags)


# -- jump kernels ------------------------------------------------------------
def jump_kernel(g, profile, V, interior=None):
    """Long range kernel comparable to ``1 / (V(d) phi(d))``.

    Off-diagonal entries are ``w(x, y) / Z`` with ``w = 1/(V(d) phi(d))`` and
    ``Z = 2 max_x sum_{y != x} w(x, y) mu(y)``, so every vertex keeps at least
    half of its mass on the diagonal.  ``flags.C_phi`` is the comparability
    constant measured over pairs of ``interior`` vertices (diagonal included).
    """
    D = g.distance_matrix()
    mu = g.measure
    dvals = np.arange(D.max() + 1, dtype=float)
    wtab = 1.0 / (np.asarray(V(dvals)) * np.asarray(profile(dvals)))
    W = wtab[D]
    np.fill_diagonal(W, 0.0)
    Z = 2.0 * float((W @ mu).max())
    K = W / Z
    diag = (1.0 - K @ mu) / mu
    K[np.diag_indices_from(K)] = diag
    idx = np.arange(g.n) if interior is None else np.asarray(interior)
    ratio = K[np.ix_(idx, idx)] / wtab[D[np.ix_(idx, idx)]]
    C_phi = float(max(ratio.max(), 1.0 / ratio.min()))
    label = f"jump(beta={profile.beta},lambda={profile.log_exponent})"
    return MarkovKernel(K, mu, label, graph=g, flags=KernelFlags(C_phi=C_phi, Z=Z))


def series_constant(profile, terms=200_000):
    """``c_phi = (sum_{n>=1} 1/(n phi(n)))^{-1}``.

    Direct summation of the first ``terms`` terms plus an Euler-Maclaurin tail.
    """
    n = np.arange(1, terms + 1, dtype=float)
    head = float(np.sum(1.0 / (n * profile(n))))
    f = lambda s: 1.0 / (s * profile(s))
    M = float(terms)
    # int_M^inf ds/(s phi(s)) with s = M e^v, evaluated in log space
    lm = math.log(M)

    def g(v):
        log_phi = profile.beta * np.logaddexp(0.0, lm + v)
        if profile.log_exponent:
            log_phi += profile.log_exponent * math.log(np.logaddexp(1.0, lm + v))
        return math.exp(-max(log_phi, 0.0))

    tail_int, _ = integrate.quad(g, 0.0, np.inf, limit=200)
    h = 1e-3 * M
    fprime = (f(M + h) - f(M - h)) / (2 * h)
    tail = tail_int - 0.5 * f(M) - fprime / 12.0
    return 1.0 / (head + tail)


def default_truncation(g, gamma):
    """Smallest ``N`` with ``2 floor(N^gamma) >= 4 * diameter``."""
    target = 4 * g.diameter()
    N = 1
    while 2 * math.floor(N**gamma) < target:
        N += 1
    return N


def subordination_weights(profile, gamma, N):
    """Mixture weights and exponents of the subordinated kernel.

    Returns ``(weights, exponents, c_phi, folded_tail)`` where the tail mass
    beyond ``N`` has been added to the last weight.
    """
    c = series_constant(profile)
    n = np.arange(1, N + 1, dtype=float)
    w = c / (n * profile(n))
    tail = 1.0 - w.sum()
    w[-1] += tail
    expo = 2 * np.floor(n**gamma + 1e-9).astype(np.int64)
    return w, expo, c, tail


def subordinated_kernel(Q, profile, gamma, N=None):
    """``Q_phi = sum_{n<=N} c_phi/(n phi(n)) Q^{2 floor(n^gamma)}`` with tail folding.

    Built from the eigendecomposition of ``Q``.  ``flags.short_truncation`` is
    set when ``2 floor(N^gamma)`` is below the graph diameter.
    """
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    g = Q.graph
    if N is None:
        N = default_truncation(g, gamma) if g is not None else 64
    if N < 1:
        raise ValueError("truncation must be >= 1")
    w, expo, c, tail = subordination_weights(profile, gamma, N)

    def fn(lam):
        return sum(wi * lam ** int(e) for wi, e in zip(w, expo))

    short = g is not None and expo[-1] < g.diameter()
    flags = KernelFlags(c_phi=c, truncation=N, tail_mass=tail, short_truncation=bool(short))
    label = f"subordinated(beta={profile.beta},lambda={profile.log_exponent},gamma={gamma:.6g})"
    return spectral_kernel(Q, fn, label, flags=flags)


# -- Dirichlet forms ---------------------------------------------------------
@dataclass
class DirichletReport:
    energy: float
    pairwise: float
    l1: float
    l2: float
    linf: float


def norm(K_or_mu, f, p):
    mu = K_or_mu.measure if hasattr(K_or_mu, "measure") else np.asarray(K_or_mu)
    f = np.asarray(f, float)
    if p == np.inf:
        return float(np.abs(f).max())
    return float((np.abs(f) ** p * mu).sum() ** (1.0 / p))


def inner(K_or_mu, f, h):
    mu = K_or_mu.measure if hasattr(K_or_mu, "measure") else np.asarray(K_or_mu)
    return float(np.sum(f * h * mu))


def energy(K, f, power=1):
    """``<(I - K^power) f, f>`` in ``l^2(mu)``."""
    f = np.asarray(f, float)
    return inner(K, f, f - power_apply(K, power, f))


def dirichlet(K, f):
    """Dirichlet energy of ``f`` evaluated two ways.

    ``energy`` is the quadratic form ``<(I-K)f, f>``; ``pairwise`` is
    ``1/2 sum_{x,y} (f(x)-f(y))^2 k(x,y) mu(x) mu(y)``.
    """
    f = np.asarray(f, float)
    E = energy(K, f)
    mu = K.measure
    if K.is_sparse:
        C = K.k.tocoo()
        pw = 0.5 * float(np.sum((f[C.row] - f[C.col]) ** 2 * C.data * mu[C.row] * mu[C.col]))
    else:
        diff2 = (f[:, None] - f[None, :]) ** 2
        pw = 0.5 * float(np.sum(diff2 * K.k * mu[:, None] * mu[None, :]))
    return DirichletReport(E, pw, norm(K, f, 1), norm(K, f, 2), norm(K, f, np.inf))


# -- decay of the on-diagonal kernel ----------------------------------------
@dataclass
class DecayCurve:
    n: np.ndarray
    psi: np.ndarray
    flag_boundary: np.ndarray
    base_vertex_argmax: np.ndarray
    label: str = ""

    def rows(self):
        for n, p, f, b in zip(self.n, self.psi, self.flag_boundary, self.base_vertex_argmax):
            yield int(n), float(p), bool(f), int(b)


def _psi_block(K, xs, n_list):
    R = np.zeros((K.size, len(xs)))
    R[xs, np.arange(len(xs))] = 1.0 / K.measure[xs]
    out = np.empty((len(n_list), len(xs)))
    cur = 0
    for j, n in enumerate(n_list):
        for _ in range(n - cur):
            R = K.apply(R)
        cur = n
        out[j] = (R**2 * K.measure[:, None]).sum(axis=0)
    return out


def psi(K, n_list, base_set=None, safe_n=None, method="power", workers=1, block=32):
    """``psi_K(n) = max_x k_{2n}(x, x)`` over ``base_set``.

    ``k_{2n}(x, x)`` is evaluated as ``sum_y k_n(x, y)^2 mu(y)``; rows are
    advanced incrementally along the increasing ``n_list``.  With
    ``method="spectral"`` the eigendecomposition of ``K`` is used instead.
    Entries with ``n > safe_n`` are flagged.

    Base vertices are processed in fixed blocks; with ``workers > 1`` blocks
    run in a thread pool and are merged in block order, so results do not
    depend on the pool size.
    """
    n_list = np.asarray(n_list, dtype=np.int64)
    if np.any(np.diff(n_list) <= 0) or (len(n_list) and n_list[0] < 0):
        raise ValueError("n_list must be increasing and nonnegative")
    xs = np.arange(K.size) if base_set is None else np.asarray(base_set, dtype=np.int64)
    if method == "spectral":
        lam, U = K.eig()
        U2 = U[xs] ** 2 / K.measure[xs, None]
        # k_0(x, x) = 1/mu(x) exactly
        vals = np.stack([U2 @ lam ** (2 * int(n)) if n else 1.0 / K.measure[xs] for n in n_list])
    elif method == "power":
        chunks = [xs[i : i + block] for i in range(0, len(xs), block)]
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda c: _psi_block(K, c, n_list), chunks))
        else:
            parts = [_psi_block(K, c, n_list) for c in chunks]
        vals = np.concatenate(parts, axis=1)
    else:
        raise ValueError(f"unknown method {method!r}")
    arg = vals.argmax(axis=1)
    flags = np.zeros(len(n_list), dtype=bool) if safe_n is None else n_list > safe_n
    return DecayCurve(n_list, vals.max(axis=1), flags, xs[arg], K.label)


def moment(K, r, base_set=None):
    """``max_x sum_y d(x, y)^r k(x, y) mu(y)`` over ``base_set`` (all vertices by default)."""
    if r <= 0:
        raise ValueError("moment order must be positive")
    g = K.graph
    xs = np.arange(K.size) if base_set is None else np.asarray(base_set)
    D = g.distance_matrix()[xs].astype(float)
    rows = K.dense()[xs] if not K.is_sparse else K.k[xs].toarray()
    return float(np.max(np.sum(D**r * rows * K.measure[None, :], axis=1)))


# -- resistance --------------------------------------------------------------
def conductances(g_or_K):
    """Symmetric conductance matrix: ``mu_xy`` for a graph, ``k mu mu`` for a kernel."""
    if isinstance(g_or_K, WeightedGraph):
        return g_or_K.adjacency.tocsr()
    K = g_or_K
    mu = K.measure
    if K.is_sparse:
        C = (sp.diags(mu) @ K.k @ sp.diags(mu)).tolil()
        C.setdiag(0)
        return C.tocsr()
    C = K.k * mu[:, None] * mu[None, :]
    np.fill_diagonal(C, 0.0)
    return C


def resistance(g_or_K, A, B, tol=1e-10, return_potential=False):
    """Effective resistance between disjoint vertex sets ``A`` and ``B``.

    Solves the Dirichlet problem ``f = 1`` on ``A``, ``f = 0`` on ``B``,
    harmonic elsewhere, with Jacobi-preconditioned conjugate gradients, and
    returns ``1 / E(f, f)``.  Returns ``inf`` when ``A`` and ``B`` are not
    connected through positive conductances.
    """
    A = np.unique(np.asarray(A, dtype=np.int64))
    B = np.unique(np.asarray(B, dtype=np.int64))
    if len(A) == 0 or len(B) == 0:
        raise ValueError("A and B must be nonempty")
    if np.intersect1d(A, B).size:
        raise ValueError("A and B must be disjoint")
    C = conductances(g_or_K)
    n = C.shape[0]
    from scipy.sparse import csgraph

    ncomp, labels = csgraph.connected_components(sp.csr_matrix(C), directed=False)
    if not set(labels[A]) & set(labels[B]):
        return (np.inf, None) if return_potential else np.inf
    deg = np.asarray(C.sum(axis=1)).ravel()
    fixed = np.zeros(n, dtype=bool)
    fixed[A] = fixed[B] = True
    free = np.flatnonzero(~fixed)
    f = np.zeros(n)
    f[A] = 1.0
    if len(free):
        if sp.issparse(C):
            C_ff = C[free][:, free]
            rhs = np.asarray(C[free][:, A].sum(axis=1)).ravel()
            L = sp.diags(deg[free]) - C_ff
        else:
            C_ff = C[np.ix_(free, free)]
            rhs = C[np.ix_(free, A)].sum(axis=1)
            L = np.diag(deg[free]) - C_ff
        maxiter = max(int(50 * math.sqrt(n)), 100)
        f[free] = pcg(L, rhs, diag=deg[free], tol=tol, maxiter=maxiter)
    if sp.issparse(C):
        Cc = C.tocoo()
        E = 0.5 * float(np.sum((f[Cc.row] - f[Cc.col]) ** 2 * Cc.data))
    else:
        E = 0.5 * float(np.sum((f[:, None] - f[None, :]) ** 2 * C))
    R = 1.0 / E
    return (R, f) if return_potential else R
