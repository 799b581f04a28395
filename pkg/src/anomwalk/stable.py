"""Discrete-stable subordination of the lazy walk ``Q``.

``A(t, i) = P(N(S(t)) = i)`` where ``S`` is a ``beta0``-stable subordinator
and ``N`` an independent unit-rate Poisson process.  Its generating function
is ``exp(-t (1 - z)**beta0)``; differentiating gives the nonnegative
recurrence used here,

    p_0 = exp(-t),   (i + 1) p_{i+1} = t beta0 sum_{j<=i} a_j p_{i-j},

with ``a_j`` the (positive) power-series coefficients of ``(1-z)**(beta0-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .operators import KernelFlags, MarkovKernel, spectral_kernel


@dataclass
class DiscreteStableWeights:
    t: float
    beta0: float
    pmf: np.ndarray
    tail_mass: float
    eps: float = 1e-10

    @property
    def i_max(self):
        return len(self.pmf) - 1

    @property
    def complete(self):
        return self.tail_mass < self.eps

    def to_csv_rows(self):
        return [(i, float(a)) for i, a in enumerate(self.pmf)]


def _check_beta0(beta0, allow_one=True):
    hi_ok = beta0 <= 1.0 if allow_one else beta0 < 1.0
    if not (0.0 < beta0 and hi_ok):
        rng = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"beta0 must lie in {rng}, got {beta0}")


def binomial_series(beta0, n):
    """``a_j = |binom(beta0 - 1, j)|`` for ``j < n`` by the product recurrence."""
    j = np.arange(1, n, dtype=float)
    ratios = (j - beta0) / j
    return np.concatenate([[1.0], np.cumprod(ratios)])


def _extend(p, a, c, start):
    # fill p[start+1:] in place from p[:start+1]
    for i in range(start, len(p) - 1):
        p[i + 1] = c * np.dot(a[: i + 1], p[i::-1]) / (i + 1)


def discrete_stable_pmf(t, beta0, i_max, eps=1e-10):
    """``A(t, i)`` for ``i = 0..i_max``.

    ``tail_mass`` is ``1 - sum(pmf)``; the object reports itself incomplete
    when the tail is not below ``eps``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    _check_beta0(beta0)
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    i_max = int(i_max)
    p = np.zeros(i_max + 1)
    p[0] = math.exp(-t)
    _extend(p, binomial_series(beta0, i_max), t * beta0, 0)
    tail = max(0.0, 1.0 - math.fsum(p))
    return DiscreteStableWeights(float(t), float(beta0), p, tail, eps)


def adaptive_pmf(t, beta0, eps=1e-10, budget=1 << 16, start=256):
    """Smallest prefix with tail below ``eps``, grown by doubling up to ``budget``."""
    if not t > 0:
        raise ValueError("t must be positive")
    _check_beta0(beta0)
    a = binomial_series(beta0, budget)
    p = np.zeros(1)
    p[0] = math.exp(-t)
    n = min(start, budget)
    while True:
        old = len(p) - 1
        p = np.concatenate([p, np.zeros(n - old)])
        _extend(p, a, t * beta0, old)
        csum = np.cumsum(p)
        hit = np.flatnonzero(1.0 - csum < eps)
        if len(hit):
            p = p[: hit[0] + 1]
            break
        if n >= budget:
            break
        n = min(2 * n, budget)
    tail = max(0.0, 1.0 - math.fsum(p))
    return DiscreteStableWeights(float(t), float(beta0), p, tail, eps)


def tail_series(t, beta0, N, dps=50):
    """Exact ``P(N(S(t)) > N)`` from the alternating expansion (mpmath).

    Uses ``sum_k (-1)^{k+1} t^k / k! * Gamma(N+1-k beta0) / (Gamma(1-k beta0) Gamma(N+1))``,
    the coefficient of ``z^N`` in ``(1 - exp(-t (1-z)^beta0)) / (1 - z)``.
    Independent of the recurrence; used as an oracle.
    """
    import mpmath as mp

    with mp.workdps(dps):
        t_, b_, N_ = mp.mpf(t), mp.mpf(beta0), mp.mpf(N)
        total = mp.mpf(0)
        k = 1
        term_fact = mp.mpf(1)
        small = 0
        while True:
            term_fact = term_fact * t_ / k
            c = mp.rgamma(1 - k * b_)
            if c == 0:
                term = mp.mpf(0)
            else:
                term = (-1) ** (k + 1) * term_fact * c * mp.exp(
                    mp.loggamma(N_ + 1 - k * b_) - mp.loggamma(N_ + 1)
                )
            total += term
            small = small + 1 if abs(term) < mp.mpf(10) ** (-dps + 5) * max(abs(total), 1e-300) else 0
            if (small >= 3 and k > t * 3) or k > 2000:
                break
            k += 1
        return float(total)


def sample_stable_subordinator(t, beta0, size, rng):
    """Positive ``beta0``-stable variables with ``E exp(-s S) = exp(-t s**beta0)``.

    Kanter's representation of the Chambers-Mallows-Stuck construction.
    """
    if beta0 == 1.0:
        return np.full(size, float(t))
    U = rng.uniform(0.0, math.pi, size)
    E = rng.exponential(1.0, size)
    a = beta0
    S1 = (np.sin(a * U) / np.sin(U) ** (1.0 / a)) * (np.sin((1.0 - a) * U) / E) ** ((1.0 - a) / a)
    return t ** (1.0 / a) * S1


def monte_carlo_check(t, beta0, samples=1_000_000, seed=0, min_expected=5.0):
    """Chi-square agreement of the pmf with ``N(S(t))`` sampled directly.

    Returns ``(statistic, p_value, bins)``.  Bins are ``0..B-1`` plus a tail
    bin ``>= B`` with ``B`` the last index whose expected count is at least
    ``min_expected``.
    """
    rng = np.random.default_rng(seed)
    S = sample_stable_subordinator(t, beta0, samples, rng)
    # Poisson(S) for S beyond 1e15 lands in the tail bin with certainty
    huge = S > 1e15
    counts = rng.poisson(np.where(huge, 0.0, S))
    counts[huge] = np.iinfo(np.int64).max
    w = discrete_stable_pmf(t, beta0, 4096)
    expected = w.pmf * samples
    ok = np.flatnonzero(expected >= min_expected)
    B = int(ok.max()) + 1 if len(ok) else 1
    # contiguous leading bins only
    B = min(B, int(np.argmax(expected < min_expected)) if np.any(expected < min_expected) else B)
    obs = np.bincount(np.minimum(counts, B), minlength=B + 1)[: B + 1].astype(float)
    exp_ = np.concatenate([expected[:B], [samples - expected[:B].sum()]])
    stat, pval = stats.chisquare(obs, exp_)
    return float(stat), float(pval), B + 1


# -- subordinated kernel ------------------------------------------------------
def stable_kernel(Q, t, beta0, eps=1e-10, budget=1 << 16, method="mixture"):
    """Kernel ``k_{t,beta0} = sum_i A(t, i) q_i``.

    ``method="mixture"`` truncates at the first ``i_max`` whose tail is below
    ``eps`` (or at ``budget``, flagging the kernel incomplete) and folds the
    tail into the last term.  ``method="closed_form"`` applies the
    generating function ``exp(-t (1 - lambda)**beta0)`` to the spectrum,
    i.e. the untruncated mixture.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    _check_beta0(beta0, allow_one=False)
    label = f"stable(t={t:g},beta0={beta0:g})"
    if method == "closed_form":
        fn = lambda lam: np.exp(-t * np.clip(1.0 - lam, 0.0, None) ** beta0)
        return spectral_kernel(Q, fn, label, flags=KernelFlags(tail_mass=0.0))
    if method != "mixture":
        raise ValueError(f"unknown method {method!r}")
    w = adaptive_pmf(t, beta0, eps=eps, budget=budget)
    coef = w.pmf.copy()
    coef[-1] += w.tail_mass

    def fn(lam):
        out = np.zeros_like(lam)
        pw = np.ones_like(lam)
        for c in coef:
            out += c * pw
            pw *= lam
        return out

    flags = KernelFlags(truncation=w.i_max, tail_mass=w.tail_mass, incomplete=not w.complete)
    return spectral_kernel(Q, fn, label, flags=flags)


def stable_kernel_direct(Q, t, beta0, i_max):
    """Truncated mixture by explicit powers of ``Q`` (dense; small graphs only)."""
    w = discrete_stable_pmf(t, beta0, i_max)
    coef = w.pmf.copy()
    coef[-1] += w.tail_mass
    T = Q.transition_matrix()
    T = T.toarray() if hasattr(T, "toarray") else np.asarray(T)
    acc = np.zeros_like(T)
    cur = np.eye(len(T))
    for c in coef:
        acc += c * cur
        cur = cur @ T
    return MarkovKernel(acc / Q.measure[None, :], Q.measure, "stable-direct", graph=Q.graph)


def local_volume(g, x, r):
    """``V(x, r)`` for real ``r >= 0`` (balls are hop balls, so ``floor(r)`` counts)."""
    d = g.distances_from(x)
    vols = np.cumsum(np.bincount(d, weights=g.measure))
    r = np.floor(np.asarray(r, float)).astype(np.int64)
    return vols[np.clip(r, 0, len(vols) - 1)]


def poisson_volume_bound_check(g, x, gamma, u_grid):
    """Max over ``u`` of ``V(x, u^{1/gamma}) * sum_i Poi_u(i) / V(x, i^{1/gamma})``.

    Returns ``(max_ratio, ratios)``.
    """
    ratios = []
    for u in u_grid:
        u = float(u)
        if u == 0.0:
            ratios.append(1.0)
            continue
        hi = int(u + 12 * math.sqrt(u) + 40)
        i = np.arange(hi + 1)
        w = stats.poisson.pmf(i, u)
        s = np.sum(w / local_volume(g, x, i ** (1.0 / gamma)))
        ratios.append(float(s * local_volume(g, x, u ** (1.0 / gamma))))
    ratios = np.array(ratios)
    return float(ratios.max()), ratios


@dataclass
class BandReport:
    """Ratio extremes of a two-sided band check."""

    grid: dict
    ratio_min: float
    ratio_max: float
    ratios: np.ndarray

    @property
    def spread(self):
        return self.ratio_max / self.ratio_min

    def as_dict(self):
        return {
            "grid": self.grid,
            "band": {"min": self.ratio_min, "max": self.ratio_max},
            "spread": self.spread,
        }


def evidence_profile(g, x, y, n, beta):
    """``min(1/V(x, n^{1/beta}), n / (V(x, d) (1 + d)^beta))``."""
    d = g.distances_from(x)[y]
    near = 1.0 / local_volume(g, x, n ** (1.0 / beta))
    far = n / (local_volume(g, x, d) * (1.0 + d) ** beta)
    return np.minimum(near, far)


def evidence_band_check(g, Q, t_list, beta0, gamma, base, radius, method="mixture", **kw):
    """Ratio of ``k_{n,beta0}(x, y)`` to the two-sided profile.

    ``base`` are interior vertices ``x``; every ``y`` within hop distance
    ``radius`` of ``x`` is included.  ``beta = beta0 * gamma``.
    """
    base = np.asarray(base)
    if len(base) == 0:
        raise ValueError("empty interior sample")
    beta = beta0 * gamma
    ratios = []
    for n in t_list:
        K = stable_kernel(Q, float(n), beta0, method=method, **kw)
        for x in base:
            ys = np.flatnonzero(g.distances_from(x) <= radius)
            kv = K.k[x, ys]
            ratios.append(kv / evidence_profile(g, x, ys, n, beta))
    r = np.concatenate(ratios)
    grid = {"t": [float(n) for n in t_list], "beta0": beta0, "gamma": gamma,
            "radius": float(radius), "base_size": int(len(base))}
    return BandReport(grid, float(r.min()), float(r.max()), r)
