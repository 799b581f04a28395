"""Measured-constant reports for the functional inequalities of the theory.

Every check returns a :class:`ConstantReport`.  Bands are always judged as
``max/min`` ratios; the theory only asserts that constants exist.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import UnsafeWindowError, ball_average, fit_loglog_slope
from .operators import (
    energy,
    inner,
    jump_kernel,
    kernel_row,
    moment,
    natural_walk,
    lazy_pair,
    norm,
    psi,
    resistance,
)

SLACK = 1e-12


@dataclass
class ConstantReport:
    """Outcome of one inequality check.

    ``constants`` holds the measured best constants, ``band`` the extremes of
    the normalized ratio and ``violations`` the exact count of entries that
    break the inequality beyond the slack.
    """

    inequality_id: str
    grid: dict
    constants: dict = field(default_factory=dict)
    band: dict | None = None
    slope: dict | None = None
    violations: int = 0
    passed: bool = True
    family: str = ""
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return _plain(d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _band(values):
    v = np.asarray(values, float)
    return {"min": float(v.min()), "max": float(v.max())}


def band_ratio(band):
    return band["max"] / band["min"] if band["min"] > 0 else math.inf


def trimmed_slope(n, y, trim=0.1):
    """Log-log slope after dropping the smallest and largest ``trim`` fraction of the window."""
    n = np.asarray(n, float)
    y = np.asarray(y, float)
    keep = (n > 0) & (y > 0)
    n, y = n[keep], y[keep]
    k = int(math.floor(trim * len(n)))
    if len(n) - 2 * k < 3:
        raise ValueError("window too short for a slope fit")
    sl = slice(k, len(n) - k)
    return fit_loglog_slope(n[sl], y[sl])


# -- test functions ----------------------------------------------------------
def test_functions(K, centers=None, radii=(1, 2, 4, 8), n_random=8, n_eigen=4, seed=0,
                   harmonic=True):
    """Functions the proofs use, as ``(family_id, f)`` pairs.

    Normalized ball indicators, resistance-problem harmonic potentials,
    random unit vectors (fixed seed) and, for graphs up to 2000 vertices,
    the top nontrivial eigenvectors of ``K``.
    """
    g = K.graph
    out = []
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = [int(np.argmax(g.boundary_distance()))] if g is not None else [0]
    for x in centers:
        d = g.distances_from(x)
        for r in radii:
            ind = (d <= r).astype(float)
            out.append((f"ball(x={x},r={r})", ind / norm(K, ind, 1)))
            if harmonic:
                A = np.flatnonzero(d <= r)
                B = np.flatnonzero(d > 2 * r)
                if len(B):
                    _, f = resistance(g, A, B, return_potential=True)
                    out.append((f"harmonic(x={x},r={r})", f))
    for i in range(n_random):
        f = rng.standard_normal(K.size)
        out.append((f"random({i})", f / norm(K, f, 2)))
    if n_eigen and K.size <= 2000:
        lam, U = K.eig()
        s = 1.0 / np.sqrt(K.measure)
        for j in range(2, 2 + n_eigen):
            out.append((f"eigen({j - 1})", U[:, -j] * s))
    return out


def random_functions(n, count, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(n) for _ in range(count)]


# -- folklore lemmas ----------------------------------------------------------
def check_dircomp(K, fs, n_max=16, slack=SLACK):
    """``E_{K^n}(f, f) <= n E_K(f, f)`` for ``n = 2..n_max``.

    Each ``f`` is scaled to unit ``l^2(mu)`` norm first (both sides are
    2-homogeneous), so ``slack`` is absolute.
    """
    viol = 0
    worst = -math.inf
    for f in fs:
        f = _nonzero(K, f)
        f = f / norm(K, f, 2)
        ff = inner(K, f, f)
        h = K.apply(f)
        E1 = ff - inner(K, h, f)
        for n in range(2, n_max + 1):
            h = K.apply(h)
            En = ff - inner(K, h, f)
            excess = En - n * E1
            worst = max(worst, excess)
            viol += int(excess > slack)
    rep = ConstantReport("dircomp", {"n_max": n_max, "functions": len(fs), "slack": slack},
                         constants={"max_excess": worst}, violations=viol, passed=viol == 0)
    rep.family = K.label
    return rep


def check_noninc(K, fs, i_max=16, slack=SLACK):
    """``i -> ||K^i f||_2 / ||K^{i-1} f||_2`` is non-decreasing."""
    viol = 0
    worst = -math.inf
    for f in fs:
        f = _nonzero(K, f)
        f = f / norm(K, f, 2)
        prev_norm = 1.0
        prev_ratio = None
        h = f
        for _ in range(i_max):
            h = K.apply(h)
            nh = norm(K, h, 2)
            if prev_norm < 1e-300:
                break
            ratio = nh / prev_norm
            if prev_ratio is not None:
                drop = prev_ratio - ratio
                worst = max(worst, drop)
                viol += int(drop > slack)
            prev_ratio, prev_norm = ratio, nh
    rep = ConstantReport("noninc", {"i_max": i_max, "functions": len(fs), "slack": slack},
                         constants={"max_drop": worst}, violations=viol, passed=viol == 0)
    rep.family = K.label
    return rep


def _nonzero(K, f):
    f = np.asarray(f, float)
    if not np.any(f):
        raise ValueError("the zero function is not admissible")
    return f


# -- pseudo-Poincare and Nash --------------------------------------------------
def _check_radii(g, radii, what="R_grid"):
    rs = g.safe_radius()
    if max(radii) > rs:
        raise UnsafeWindowError(f"{what} exceeds boundary-safe radius {rs:g}", rs)


def verify_pseudo_poincare(K, etazeta, R_grid, f_family, band_tol=5.0):
    """Needed constant in ``||f - f_R||^2 <= C eta(R) E_K(f, f)`` for each ``R``.

    Constant functions are skipped (0/0).  The report's band is over the
    per-``R`` maxima; the check passes when it stays within ``band_tol``.
    """
    g = K.graph
    _check_radii(g, R_grid)
    per_R = {}
    skipped = 0
    for R in R_grid:
        best = 0.0
        for fid, f in f_family:
            E = energy(K, f)
            if E <= SLACK * inner(K, f, f):
                skipped += 1
                continue
            lhs = norm(K, f - ball_average(g, f, R), 2) ** 2
            if R < 1:
                ratio = 0.0
            else:
                ratio = lhs / (etazeta.eta(float(R)) * E)
            best = max(best, ratio)
        per_R[float(R)] = best
    vals = np.array([v for v in per_R.values() if v > 0])
    band = _band(vals) if len(vals) else {"min": 0.0, "max": 0.0}
    ok = len(vals) > 0 and band_ratio(band) <= band_tol and np.all(np.isfinite(vals))
    rep = ConstantReport(
        "pseudo_poincare",
        {"R": [float(r) for r in R_grid], "functions": len(f_family), "band_tol": band_tol},
        constants={"C_needed": max(per_R.values()), "per_R": per_R},
        band=band,
        passed=bool(ok),
        family="mixed",
    )
    if skipped:
        rep.notes.append(f"skipped {skipped} (f, R) pairs with vanishing energy")
    return rep


def nash_C2(V, measure):
    """Smallest ``C2`` with ``V^{-1}(C2 ||f||_1^2/||f||_2^2) >= 1`` for every ``f``.

    ``||f||_1^2 / ||f||_2^2 >= min mu`` with equality at point masses.
    """
    return float(V(1.0) / np.min(measure))


def verify_nash(K, etazeta, V, f_family, C2=None, band_tol=10.0):
    """Per-``f`` constant ``C1 = ||f||^2 / (E_{K^2}(f,f) eta~(V^{-1}(C2 ||f||_1^2/||f||_2^2)))``.

    Passes when ``max C1 <= band_tol * median C1``.
    """
    C2 = nash_C2(V, K.measure) if C2 is None else float(C2)
    vals = {}
    for fid, f in f_family:
        f = _nonzero(K, f)
        l1, l2sq = norm(K, f, 1), norm(K, f, 2) ** 2
        E2 = energy(K, f, power=2)
        if E2 <= SLACK * l2sq:
            continue
        r = V.inverse(C2 * l1**2 / l2sq)
        vals[fid] = l2sq / (E2 * etazeta.eta_tilde(float(r)))
    c = np.array(list(vals.values()))
    med = float(np.median(c))
    ok = bool(c.max() <= band_tol * med)
    return ConstantReport(
        "nash",
        {"functions": len(f_family), "C2": C2, "band_tol": band_tol},
        constants={"C1_max": float(c.max()), "C1_median": med, "C2": C2, "per_f": vals},
        band=_band(c),
        passed=ok,
        family="mixed",
    )


# -- resistance ---------------------------------------------------------------
def verify_resistance_band(g, gamma, r_grid, V, A=2, samples=12, seed=0, band_tol=10.0, Q=None):
    """``R_P(B(x,r), B(x,Ar)^c) V(r) / r^gamma`` over sampled ``x`` and ``r``.

    Also recomputes each resistance with the lazy pair ``Q`` and counts
    ratios ``R_Q / R_P`` outside ``[1/2, 2]`` as violations.
    """
    rs = g.safe_radius()
    if A * max(r_grid) > rs:
        raise UnsafeWindowError(f"A*r exceeds boundary-safe radius {rs:g}", rs / A)
    Q = Q if Q is not None else lazy_pair(natural_walk(g))
    rng = np.random.default_rng(seed)
    D = g.distance_matrix()
    ratios, lres, rows = [], [], []
    notes = []
    for r in r_grid:
        cand = g.interior(A * r)
        xs = np.sort(rng.choice(cand, size=min(samples, len(cand)), replace=False))
        for x in xs:
            inner_set = np.flatnonzero(D[x] <= r)
            outer = np.flatnonzero(D[x] > A * r)
            if len(outer) == 0:
                notes.append(f"empty annulus at x={x}, r={r}")
                continue
            Rp = resistance(g, inner_set, outer)
            Rq = resistance(Q, inner_set, outer)
            ratios.append(Rp * V(float(r)) / r**gamma)
            lres.append(Rq / Rp)
            rows.append((int(x), float(r), Rp, Rq))
    lres = np.array(lres)
    viol = int(np.sum((lres < 0.5 - SLACK) | (lres > 2.0 + SLACK)))
    band = _band(ratios)
    ok = band_ratio(band) <= band_tol and viol == 0
    return ConstantReport(
        "resistance",
        {"r": [float(r) for r in r_grid], "A": A, "samples": samples, "seed": seed,
         "gamma": gamma, "band_tol": band_tol},
        constants={"lres_min": float(lres.min()), "lres_max": float(lres.max()),
                   "ratios": ratios, "solves": rows},
        band=band,
        violations=viol,
        passed=bool(ok),
        family="ball_annulus",
        notes=notes,
    )


# -- sub-Gaussian bounds -------------------------------------------------------
def _solve_constant(target, a, kappa):
    """``C`` with ``C exp(-(a/C)^kappa) = target`` (the left side increases in ``C``)."""
    if target <= 0:
        return 0.0
    if a == 0:
        return target
    f = lambda lc: lc - (a / math.exp(lc)) ** kappa - math.log(target)
    lo, hi = math.log(target) - 1.0, math.log(target) + 1.0
    while f(lo) > 0:
        lo -= 2.0 * (1 + abs(lo))
    while f(hi) < 0:
        hi += 2.0 * (1 + abs(hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    return math.exp(hi)


def verify_subgaussian(g, kind, gamma, V, n_grid=None, centers=4, seed=0):
    """Fit the constants of the two-sided sub-Gaussian bound.

    ``kind="P_pair"`` uses ``p_n`` for the upper and ``p_n + p_{n+1}`` for
    the lower bound; ``kind="Q"`` uses plain ``q_n`` for both.  Samples are
    interior centres ``x``, times ``n`` with ``n^{1/gamma}`` inside the safe
    window and all ``y`` with ``d(x, y) <= min(n, safe radius)``.
    """
    if kind not in ("P_pair", "Q", "P"):
        raise ValueError("kind must be 'P_pair', 'P' or 'Q'")
    rs = g.safe_radius()
    P = natural_walk(g)
    K = P if kind in ("P_pair", "P") else lazy_pair(P)
    nmax = int(math.floor(rs**gamma))
    if n_grid is None:
        n_grid = np.unique(np.round(np.geomspace(1, max(nmax, 1), 12)).astype(int))
    if max(n_grid) > nmax:
        raise UnsafeWindowError(f"n^(1/gamma) exceeds boundary-safe radius {rs:g}", nmax)
    rng = np.random.default_rng(seed)
    cand = g.interior(rs)
    xs = np.sort(rng.choice(cand, size=min(centers, len(cand)), replace=False))
    kappa = 1.0 / (gamma - 1.0)
    C_up, c_lo = 0.0, math.inf
    worst_up = worst_lo = None
    for x in xs:
        d = g.distances_from(x)
        cur = 0
        f = np.zeros(g.n)
        f[x] = 1.0 / g.measure[x]
        need = sorted(set(int(n) for n in n_grid) | set(int(n) + 1 for n in n_grid))
        rows = {}
        for n in need:
            for _ in range(n - cur):
                f = K.apply(f)
            cur = n
            rows[n] = f.copy()
        for n in n_grid:
            n = int(n)
            ys = np.flatnonzero(d <= min(n, rs))
            scale = V(n ** (1.0 / gamma))
            up = rows[n][ys] * scale
            lo = (rows[n][ys] + rows[n + 1][ys]) * scale if kind == "P_pair" else up
            for y, u, l in zip(ys, up, lo):
                a = d[y] ** gamma / n
                cu = _solve_constant(u, a, kappa)
                if cu > C_up:
                    C_up, worst_up = cu, (int(x), int(y), n)
                cl = _solve_constant(l, a, kappa)
                if cl < c_lo:
                    c_lo, worst_lo = cl, (int(x), int(y), n)
    rep = ConstantReport(
        "subgaussian",
        {"kind": kind, "n": [int(n) for n in n_grid], "centers": [int(x) for x in xs],
         "gamma": gamma, "seed": seed},
        constants={"C_upper": C_up, "c_lower": c_lo, "worst_upper": worst_up,
                   "worst_lower": worst_lo},
        passed=bool(np.isfinite(C_up) and c_lo > 0),
        family=kind,
    )
    if g.is_bipartite() and kind == "P":
        rep.notes.append("bipartite graph: single-time lower bound vanishes by parity")
    elif g.is_bipartite():
        rep.notes.append("bipartite graph")
    return rep


# -- lower bound mechanics ------------------------------------------------------
def _restricted_columns(K, A):
    s = np.sqrt(K.measure)
    cols = K.k[:, A]
    cols = cols.toarray() if sp.issparse(cols) else np.asarray(cols)
    return cols * s[:, None] * s[A][None, :]


def lambda_ball(K, x, r, tol=1e-10, maxiter=200_000, return_dense=False):
    """``sup ||K f||^2 / ||f||^2`` over ``f`` supported in ``B(x, r)``.

    Power iteration on the restricted operator; stops when the eigen-residual
    falls below ``tol`` relative to the current estimate.  With
    ``return_dense=True`` the value from a dense SVD is returned instead
    (oracle).
    """
    A = np.flatnonzero(K.graph.distances_from(x) <= r)
    M = _restricted_columns(K, A)
    if return_dense:
        return float(np.linalg.svd(M, compute_uv=False)[0] ** 2)
    v = np.ones(len(A)) / math.sqrt(len(A))
    theta = 0.0
    for _ in range(maxiter):
        w = M.T @ (M @ v)
        theta = float(v @ w)
        res = np.linalg.norm(w - theta * v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if res <= tol * theta:
            break
    w = M.T @ (M @ v)
    return float(v @ w)


def verify_lower_bound_mechanics(K, x, r_grid, n_grid, etazeta=None, V=None, sharp_tol=1e3):
    """``psi_K(n) >= lambda(B)^n / mu(B)`` for every ``(r, n)`` on the grid.

    With ``etazeta`` the ball of radius ``zeta(n)`` is also tried and the
    ratio ``psi_K(n) / (lambda^n / mu(B))`` reported (sharpness).
    """
    n_grid = np.asarray(sorted(set(int(n) for n in n_grid)))
    curve = psi(K, n_grid, method="spectral" if not K.is_sparse else "power")
    d = K.graph.distances_from(x)
    viol = 0
    worst = math.inf
    for r in r_grid:
        lam = lambda_ball(K, x, r)
        muB = float(K.measure[d <= r].sum())
        bound = lam ** n_grid / muB
        gap = curve.psi - bound
        worst = min(worst, float((gap / curve.psi).min()))
        viol += int(np.sum(gap < -SLACK * np.maximum(curve.psi, 1.0)))
    consts = {"min_relative_gap": worst}
    ok = viol == 0
    if etazeta is not None:
        sharp = []
        for n, p in zip(n_grid, curve.psi):
            if n == 0:
                continue
            R = etazeta.zeta(float(n))
            lam = lambda_ball(K, x, R)
            muB = float(K.measure[d <= R].sum())
            sharp.append(p / (lam**n / muB))
        consts["sharpness_max"] = float(max(sharp))
        ok = ok and max(sharp) <= sharp_tol
    return ConstantReport(
        "lower_bound",
        {"x": int(x), "r": [float(r) for r in r_grid], "n": n_grid.tolist()},
        constants=consts,
        violations=viol,
        passed=bool(ok),
        family="ball",
    )


# -- threshold -----------------------------------------------------------------
def zeta_window(g, etazeta):
    """Largest ``n`` with ``zeta(n) <= safe radius``."""
    rs = g.safe_radius()
    nmax = int(math.floor(etazeta.eta_tilde(rs)))
    if nmax < 1:
        raise UnsafeWindowError(
            f"empty n window: safe radius {rs:g} = min(diameter/4, boundary distance - 1) "
            "is too small for this profile", rs)
    return nmax


def power_window(g, gamma):
    """Largest ``n`` with ``n^{1/gamma} <= safe radius``."""
    rs = g.safe_radius()
    nmax = int(math.floor(rs**gamma + 1e-9))
    if nmax < 1:
        raise UnsafeWindowError(f"empty n window: safe radius {rs:g} below 1", rs)
    return nmax


def verify_threshold(K, V, n_list, base_set=None, etazeta=None, gamma=None, scale=None,
                     band_tol=10.0, slope_target=None, slope_tol=None, trim=0.1, method="power",
                     workers=1):
    """``psi_K(n) V(zeta(n))`` over the window, plus the trimmed log-log slope.

    Give exactly one length scale: ``etazeta`` for the clock ``zeta``,
    ``gamma`` for the plain ``n^{1/gamma}``, or any callable ``scale``.
    """
    n_list = np.asarray(n_list, dtype=np.int64)
    if len(n_list) == 0:
        raise UnsafeWindowError(
            "empty n window; the boundary-safe rule requires zeta(n) <= min(diameter/4, "
            "boundary distance - 1)", 0)
    if sum(x is not None for x in (etazeta, gamma, scale)) != 1:
        raise ValueError("give exactly one of etazeta, gamma and scale")
    curve = psi(K, n_list, base_set, method=method, workers=workers)
    if etazeta is not None:
        label, r = "zeta", etazeta.zeta(n_list.astype(float))
    elif gamma is not None:
        label, r = f"n^(1/{gamma:.6g})", n_list ** (1.0 / gamma)
    else:
        label, r = getattr(scale, "__name__", "custom"), np.asarray(scale(n_list), float)
    ratio = curve.psi * V(r)
    band = _band(ratio)
    slope = None
    ok = band_ratio(band) <= band_tol
    if len(n_list) >= 5:
        s, se = trimmed_slope(n_list, curve.psi, trim)
        slope = {"value": s, "stderr": se}
        if slope_target is not None:
            ok = ok and abs(s - slope_target) <= slope_tol
    rep = ConstantReport(
        "threshold",
        {"n_min": int(n_list.min()), "n_max": int(n_list.max()), "points": len(n_list),
         "scale": label,
         "band_tol": band_tol, "slope_target": slope_target, "slope_tol": slope_tol},
        constants={"ratio": ratio, "psi": curve.psi},
        band=band,
        slope=slope,
        passed=bool(ok),
        family=K.label,
    )
    return rep


def verify_moment_threshold(graphs, profile, gamma, volumes, etazeta, expect="bounded",
                            spread_tol=2.0, band_tol=10.0, growth_min=0.3, time_ratio=None):
    """Moment ``M_{gamma,K}`` and the ``psi_K(n) V(n^{1/gamma})`` band along a family.

    For each graph the jump kernel is built with its own volume profile, the
    base set is the boundary-safe interior and the window is ``zeta(n) <=
    safe radius``.

    ``expect="bounded"`` passes when the moments spread by less than
    ``spread_tol`` and every band is within ``band_tol``.  ``expect="growing"``
    passes when ``log M`` grows with the family index at slope above
    ``growth_min``, the end-of-window ratio decreases along the family, and
    on each graph the ratio decreases strictly along every self-similar time
    sequence ``n0 * time_ratio**k`` (default ``time_ratio = 2**gamma``).
    """
    if len(graphs) < 3:
        raise ValueError("need at least three graph sizes")
    if expect not in ("bounded", "growing"):
        raise ValueError("expect must be 'bounded' or 'growing'")
    q = time_ratio or round(2**gamma)
    Ms, bands, ends, mono, diam, full_mono = [], [], [], [], [], []
    for g, V in zip(graphs, volumes):
        K = jump_kernel(g, profile, V)
        rs = g.safe_radius()
        base = g.interior(rs)
        Ms.append(moment(K, gamma, base))
        nmax = zeta_window(g, etazeta)
        ns = np.arange(1, nmax + 1)
        curve = psi(K, ns, base, method="spectral")
        r = curve.psi * V(ns ** (1.0 / gamma))
        bands.append(float(r.max() / r.min()))
        ends.append(float(r[-1]))
        ok = True
        for n0 in range(1, q):
            seq = [n0 * q**k for k in range(64) if n0 * q**k <= nmax]
            if len(seq) >= 2:
                ok = ok and bool(np.all(np.diff(r[np.array(seq) - 1]) < 0))
        mono.append(ok)
        full_mono.append(bool(np.all(np.diff(r) < 0)))
        diam.append(g.diameter())
    Ms = np.array(Ms)
    growth = float(np.polyfit(np.arange(len(Ms)), np.log(Ms), 1)[0])
    consts = {"M": Ms, "psi_band": bands, "end_ratio": ends, "log_growth_per_size": growth,
              "monotone_self_similar": mono, "monotone_every_n": full_mono,
              "M_vs_log_diameter": float(np.polyfit(np.log(diam), Ms, 1)[0])}
    if expect == "bounded":
        ok = Ms.max() / Ms.min() < spread_tol and max(bands) <= band_tol
    else:
        ok = growth > growth_min and all(mono) and bool(np.all(np.diff(ends) < 0))
    return ConstantReport(
        "moment",
        {"sizes": [g.n for g in graphs], "beta": profile.beta, "gamma": gamma,
         "expect": expect, "time_ratio": q},
        constants=consts,
        band={"min": float(min(bands)), "max": float(max(bands))},
        passed=bool(ok),
        family=f"jump(beta={profile.beta:.6g})",
    )
