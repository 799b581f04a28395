"""Regularly varying jump profiles and the decay clock built from them.

For a profile ``phi`` and walk exponent ``gamma`` let

    I(t)   = int_0^t s**(gamma-1) / phi(s) ds
    eta(t) = t**gamma / I(t),          eta(0) = gamma * phi(0)

``eta_tilde`` is the running supremum of ``eta`` and ``zeta`` its numeric
inverse.  ``V(zeta(n))`` is the volume scale at which the long range walk
sits after ``n`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import fit_loglog_slope

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class JumpProfile:
    """``phi(t) = (1+t)**beta * log(e+t)**log_exponent``, floored at 1."""

    beta: float
    log_exponent: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("jump index beta must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = (1.0 + t) ** self.beta * np.log(math.e + t) ** self.log_exponent
        val = np.maximum(val, 1.0)
        return val if val.ndim else float(val)

    def floor_end(self):
        """Right end of the region where the floor at 1 is active (0 if none)."""
        if self.log_exponent >= 0:
            return 0.0
        raw = lambda t: (1.0 + t) ** self.beta * math.log(math.e + t) ** self.log_exponent
        # raw(0) = 1, so scan for the last point where raw dips below 1
        grid = np.concatenate([[0.0], np.logspace(-9, min(300.0, 300.0 / self.beta), 4000)])
        below = np.flatnonzero([raw(t) < 1.0 for t in grid])
        if below.size == 0:
            return 0.0
        lo, hi = grid[below[-1]], grid[below[-1] + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if raw(mid) < 1.0 else (lo, mid)
        return hi


def _gauss_segments(fn, a, b):
    """Gauss-Legendre (20 points) on each ``[a_i, b_i]``; vectorized over segments."""
    a = np.asarray(a, float)[:, None]
    b = np.asarray(b, float)[:, None]
    half = 0.5 * (b - a)
    x = a + half * (_GL_NODES[None, :] + 1.0)
    return (half * (fn(x) * _GL_WEIGHTS[None, :])).sum(axis=1) if x.size else np.zeros(0)


class EtaZeta:
    """Tabulated ``I``, ``eta``, ``eta_tilde`` and the inverse ``zeta``.

    Parameters
    ----------
    profile : JumpProfile
    gamma : float
        Walk exponent, ``gamma >= 2``.
    eta_max : float
        The table is extended until ``eta_tilde`` reaches this value, so
        ``zeta`` is exact on ``[eta_tilde(0), eta_max]``.
    t_max : float, optional
        Also extend the table at least to this argument.
    per_decade : int
        Geometric grid density of the table nodes.
    """

    def __init__(self, profile, gamma, eta_max=1e9, t_max=None, per_decade=64, t_min=1e-6):
        if gamma < 2:
            raise ValueError("gamma must be >= 2")
        self.profile = profile
        self.gamma = float(gamma)
        self.per_decade = int(per_decade)
        integrand = self._integrand
        t = [0.0]
        integral = [0.0]
        eta_run = [self.eta0]
        hi = t_min
        step = 10.0 ** (1.0 / per_decade)
        # grow decade by decade until eta_tilde covers eta_max
        while True:
            nodes = hi * step ** np.arange(1, per_decade + 1)
            lo_nodes = np.concatenate([[t[-1]], nodes[:-1]])
            pieces = _gauss_segments(integrand, lo_nodes, nodes)
            cum = integral[-1] + np.cumsum(pieces)
            t.extend(nodes.tolist())
            integral.extend(cum.tolist())
            eta_vals = nodes**self.gamma / cum
            eta_run.extend(np.maximum.accumulate(np.maximum(eta_vals, eta_run[-1])).tolist())
            hi = nodes[-1]
            done = eta_run[-1] >= eta_max and (t_max is None or hi >= t_max)
            if done or hi > 1e300 ** (1.0 / self.gamma):
                break
        self.t = np.array(t)
        self.integral = np.array(integral)
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_tab = np.where(self.t > 0, self.t**self.gamma / self.integral, self.eta0)
        self.eta_table = eta_tab
        self.eta_tilde_table = np.maximum.accumulate(np.array(eta_run))
        for arr in (self.t, self.integral, self.eta_table, self.eta_tilde_table):
            arr.setflags(write=False)

    def _integrand(self, s):
        return s ** (self.gamma - 1.0) / self.profile(s)

    @property
    def eta0(self):
        return self.gamma * self.profile(0.0)

    @property
    def t_max(self):
        return float(self.t[-1])

    def integral_to(self, t):
        """``int_0^t s**(gamma-1)/phi(s) ds`` for ``0 <= t <= t_max``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.t[-1]):
            raise ValueError(f"t outside tabulated range [0, {self.t[-1]:.3g}]")
        k = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 1)
        out = self.integral[k] + _gauss_segments(self._integrand, self.t[k], t)
        return out

    def eta(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        out = np.full(flat.shape, self.eta0)
        pos = flat > 0
        if pos.any():
            out[pos] = flat[pos] ** self.gamma / self.integral_to(flat[pos])
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def eta_tilde(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        k = np.clip(np.searchsorted(self.t, flat, side="right") - 1, 0, len(self.t) - 1)
        out = np.maximum(self.eta_tilde_table[k], np.atleast_1d(self.eta(flat)))
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def zeta(self, v, return_flag=False):
        """Smallest ``s`` with ``eta_tilde(s) = v``, clamped below at 1.

        Values below ``eta_tilde(0)`` are clamped (``s = 1``) and flagged.
        """
        v = np.asarray(v, dtype=float)
        flat = np.atleast_1d(v).astype(float)
        if np.any(flat > self.eta_tilde_table[-1]):
            raise ValueError(
                f"value {flat.max():.3g} beyond table range {self.eta_tilde_table[-1]:.3g}; "
                "rebuild with a larger eta_max"
            )
        below = flat < self.eta_tilde_table[0]
        k = np.searchsorted(self.eta_tilde_table, flat, side="left")
        k = np.clip(k, 1, len(self.t) - 1)
        lo = self.t[k - 1].copy()
        hi = self.t[k].copy()
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            up = self.eta_tilde(mid) >= flat
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
            if np.all(hi - lo <= 1e-13 * hi):
                break
        s = np.where(below, 1.0, np.maximum(hi, 1.0))
        out = s.reshape(v.shape) if v.ndim else float(s[0])
        if return_flag:
            return out, below.reshape(v.shape) if v.ndim else bool(below[0])
        return out

    def table(self, points=None):
        """Rows ``(t, phi, eta, eta_tilde, zeta)`` for CSV export.

        ``zeta`` is evaluated at the value ``t`` (not at ``eta(t)``) and is
        ``nan`` outside the invertible range.
        """
        if points is None:
            points = self.t[1 :: max(1, self.per_decade // 8)]
        pts = np.asarray(points, float)
        eta = self.eta(pts)
        eta_t = self.eta_tilde(pts)
        ok = (pts >= self.eta_tilde_table[0]) & (pts <= self.eta_tilde_table[-1])
        z = np.full(pts.shape, np.nan)
        if ok.any():
            z[ok] = self.zeta(pts[ok])
        return np.column_stack([pts, self.profile(pts), eta, eta_t, z])


def eta(profile, gamma, t, **kw):
    return EtaZeta(profile, gamma, **kw).eta(t)


def zeta(etazeta, t):
    return etazeta.zeta(t)


def rv_index_fit(fn_table):
    """Regular-variation index from a ``(t, f(t))`` table.

    The least-squares slope of ``log f`` against ``log t`` over the top two
    decades.  The table must span at least three decades of ``t``.
    """
    t, f = (np.asarray(c, float) for c in fn_table)
    t_pos = t[t > 0]
    if len(t_pos) < 3 or math.log10(t_pos.max() / t_pos.min()) < 3 - 1e-9:
        raise ValueError("table must span at least three decades")
    sel = (t >= t.max() / 100.0) & (t > 0)
    slope, _ = fit_loglog_slope(t[sel], f[sel])
    return slope


def eta_le_phi_check(profile, gamma, grid, etazeta=None):
    """Max over ``grid`` of ``eta(t)/phi(t)``, plus the ratio at each point."""
    ez = etazeta or EtaZeta(profile, gamma, eta_max=1.0, t_max=float(max(grid)))
    g = np.asarray(grid, float)
    ratio = ez.eta(g) / profile(g)
    return float(ratio.max()), ratio
