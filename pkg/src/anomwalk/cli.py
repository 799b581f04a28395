"""Scenario-driven command line front end.

Usage::

    anomwalk {gen,psi,verify,fit,report} scenario.cfg

A scenario is a flat ``key = value`` file; ``#`` starts a comment.  Outputs
go to the ``output`` key, else ``$ANOMWALK_OUTPUT_DIR``, else ``./out``.
Exit codes: 0 success / all checks pass, 1 a check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import families, verify
from .asymptotics import EtaZeta, JumpProfile
from .graph import GraphError, UnsafeWindowError, diagnostics, fit_loglog_slope, format_graph
from .operators import (
    jump_kernel,
    lazy_pair,
    natural_walk,
    psi,
    subordinated_kernel,
)
from .stable import adaptive_pmf, evidence_band_check, poisson_volume_bound_check, stable_kernel

ENV_OUTPUT = "ANOMWALK_OUTPUT_DIR"
KERNELS = ("natural", "lazy", "jump", "subordinated", "stable")
CHECKS = ("threshold", "resistance", "subgaussian", "pseudo_poincare", "nash", "lower_bound",
          "dircomp", "noninc", "moment", "evidence", "poisson")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    family: str = "sierpinski_gasket"
    level: int = 4
    dimension: int = 1
    perturb: bool = False
    seed: int = 0
    kernel: str = "lazy"
    beta: float = 1.0
    log_exponent: float = 0.0
    gamma: float | None = None
    alpha: float | None = None
    beta0: float = 0.5
    t: float = 1.0
    volume: str = "reference"
    n_min: int = 0
    n_max: int | None = None
    n_points: int = 0
    base: str = "interior"
    method: str = "power"
    output: str | None = None
    workers: int = 1
    checks: tuple = ("threshold",)
    band_tol: float = 10.0
    slope_target: float | None = None
    slope_tol: float = 0.15
    spread_tol: float = 2.0
    r_grid: tuple = ()
    levels: tuple = ()
    curve: str | None = None
    dump_kernel: bool = False
    budget: int = families.DEFAULT_VERTEX_BUDGET

    def family_spec(self):
        return families.FamilySpec(self.family, self.level, self.dimension,
                                   self.seed if self.perturb else None)

    def exponents(self):
        ref = families.expected_exponents(self.family_spec()) or (1.0, 2.0)
        alpha = self.alpha if self.alpha is not None else ref[0]
        gamma = self.gamma if self.gamma is not None else ref[1]
        return alpha, gamma

    def output_dir(self):
        return Path(self.output or os.environ.get(ENV_OUTPUT) or "out")


_ALIASES = {"lambda": "log_exponent"}


def _convert(name, raw, default_type):
    raw = raw.strip()
    try:
        if name in ("checks",):
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if name in ("r_grid",):
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if name in ("levels",):
            return tuple(int(s) for s in raw.split(",") if s.strip())
        if name in ("perturb", "dump_kernel"):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if name in ("level", "dimension", "seed", "n_min", "n_max", "n_points", "workers", "budget"):
            return None if raw.lower() == "auto" else int(raw)
        if name in ("beta", "log_exponent", "gamma", "alpha", "beta0", "t", "band_tol",
                    "slope_target", "slope_tol", "spread_tol"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r}") from exc


def parse_config(text):
    """Parse scenario text into a validated :class:`ScenarioConfig`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   delimiters=("=",), interpolation=None)
    try:
        cp.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    known = {f.name for f in fields(ScenarioConfig)}
    kw = {}
    for key, raw in cp["scenario"].items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kw[name] = _convert(name, raw, None)
    cfg = ScenarioConfig(**kw)
    _validate(cfg)
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _validate(cfg):
    try:
        cfg.family_spec()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.kernel not in KERNELS:
        raise ConfigError(f"kernel must be one of {KERNELS}")
    if cfg.gamma is not None and cfg.gamma < 2:
        raise ConfigError("gamma must be >= 2")
    if not cfg.beta > 0:
        raise ConfigError("beta must be positive")
    if cfg.kernel == "stable" and not 0 < cfg.beta0 < 1:
        raise ConfigError("beta0 must lie in (0, 1) for stable kernels")
    if not cfg.t > 0:
        raise ConfigError("t must be positive")
    if cfg.volume not in ("reference", "median", "fixed"):
        raise ConfigError("volume must be reference, median or fixed")
    if cfg.base not in ("interior", "all"):
        raise ConfigError("base must be interior or all")
    if cfg.method not in ("power", "spectral"):
        raise ConfigError("method must be power or spectral")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    bad = [c for c in cfg.checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"unknown inequality id(s) {bad}; choose from {CHECKS}")


# -- shared builders -----------------------------------------------------------
def _graph(cfg, level=None):
    spec = cfg.family_spec()
    if level is not None:
        spec = families.FamilySpec(spec.family, level, spec.dimension, spec.perturb_seed)
    try:
        return families.generate(spec, budget=cfg.budget)
    except families.BudgetError as exc:
        raise ConfigError(str(exc)) from exc


def _volume(cfg, g):
    from .graph import volume_profile

    if cfg.volume == "reference":
        return families.reference_profile(g, cfg.family)
    if cfg.volume == "fixed":
        return volume_profile(g, base="fixed", base_vertex=0)
    return volume_profile(g, base="median")


def _profile(cfg):
    _, gamma = cfg.exponents()
    if cfg.kernel == "stable":
        return JumpProfile(cfg.beta0 * gamma)
    return JumpProfile(cfg.beta, cfg.log_exponent)


def _kernel(cfg, g, V):
    _, gamma = cfg.exponents()
    P = natural_walk(g)
    if cfg.kernel == "natural":
        return P
    Q = lazy_pair(P)
    if cfg.kernel == "lazy":
        return Q
    if cfg.kernel == "jump":
        return jump_kernel(g, _profile(cfg), V)
    if cfg.kernel == "subordinated":
        return subordinated_kernel(Q, _profile(cfg), gamma)
    return stable_kernel(Q, cfg.t, cfg.beta0)


def _clock(cfg, g):
    """``(scale(n), safe_n, etazeta)`` for the configured kernel."""
    _, gamma = cfg.exponents()
    rs = g.safe_radius()
    if cfg.kernel in ("natural", "lazy"):
        return (lambda n: np.asarray(n, float) ** (1.0 / gamma)), verify.power_window(g, gamma), None
    ez = EtaZeta(_profile(cfg), gamma, eta_max=1.0, t_max=rs)
    safe = int(math.floor(ez.eta_tilde(rs)))
    if cfg.kernel == "stable":
        # k_t^n = k_{nt}; the clock runs in units of t
        return (lambda n: ez.zeta(np.asarray(n, float) * cfg.t)), int(safe / cfg.t), ez
    return (lambda n: ez.zeta(np.asarray(n, float))), safe, ez


def _n_list(cfg, safe_n):
    n_max = safe_n if cfg.n_max is None else cfg.n_max
    if n_max > safe_n:
        raise UnsafeWindowError(
            f"n_max={n_max} leaves the boundary-safe window; safe n_max is {safe_n}", safe_n)
    if n_max < max(cfg.n_min, 1):
        raise UnsafeWindowError(f"empty n window; safe n_max is {safe_n}", safe_n)
    if cfg.n_points and cfg.n_points < n_max - cfg.n_min + 1:
        lo = max(cfg.n_min, 1)
        ns = np.unique(np.round(np.geomspace(lo, n_max, cfg.n_points)).astype(np.int64))
        if cfg.n_min == 0:
            ns = np.concatenate([[0], ns])
        return ns
    return np.arange(cfg.n_min, n_max + 1, dtype=np.int64)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(verify._plain(obj), sort_keys=True, indent=2) + "\n")


def kernel_dump(K):
    """Text dump: header with size, label and measure checksum, then rows."""
    mu = K.measure
    digest = hashlib.sha256(np.ascontiguousarray(mu, dtype="<f8").tobytes()).hexdigest()[:16]
    lines = [f"# size {K.size}", f"# label {K.label}", f"# measure_sha256 {digest}"]
    dense = K.dense()
    for row in dense:
        lines.append(" ".join(format(float(v), ".17g") for v in row))
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------
def cmd_gen(cfg):
    g = _graph(cfg)
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.txt").write_text(format_graph(g))
    info = {
        "name": g.name,
        "vertices": g.n,
        "edges": g.num_edges,
        "is_tree": g.is_tree(),
        "is_bipartite": g.is_bipartite(),
        "diameter": g.diameter(),
        "safe_radius": g.safe_radius(),
        "boundary": list(g.boundary),
    }
    ref = families.expected_exponents(cfg.family_spec())
    if ref:
        info["expected_alpha"], info["expected_gamma"] = ref
    rs = g.safe_radius()
    grid = [2.0**k for k in range(0, 20) if 2.0**k <= rs]
    if len(grid) >= 2:
        info["diagnostics"] = diagnostics(g, grid, profile=_volume(cfg, g)).as_dict()
    _write_json(out / "diagnostics.json", info)
    return 0


def cmd_psi(cfg):
    g = _graph(cfg)
    V = _volume(cfg, g)
    scale, safe_n, ez = _clock(cfg, g)
    ns = _n_list(cfg, safe_n)
    K = _kernel(cfg, g, V)
    base = g.interior(g.safe_radius()) if cfg.base == "interior" else None
    curve = psi(K, ns, base, safe_n=safe_n, method=cfg.method, workers=cfg.workers)
    Vz = V(scale(ns))
    rows = [(n, p, v, p * v, f, b) for (n, p, f, b), v in zip(curve.rows(), Vz)]
    out = cfg.output_dir()
    _write_csv(out / "psi.csv", ["n", "psi", "V_of_zeta", "ratio", "flag_boundary",
                                 "base_vertex_argmax"], rows)
    if ez is not None:
        _write_csv(out / "eta.csv", ["t", "phi", "eta", "eta_tilde", "zeta"], ez.table())
    if cfg.kernel == "stable":
        w = adaptive_pmf(cfg.t, cfg.beta0)
        _write_csv(out / "pmf.csv", ["i", "A"], w.to_csv_rows())
    if cfg.dump_kernel:
        (out / "kernel.txt").write_text(kernel_dump(K))
    return 0


def _run_check(cfg, name, g, V):
    alpha, gamma = cfg.exponents()
    rs = g.safe_radius()
    r_grid = list(cfg.r_grid) or [2.0**k for k in range(0, 20) if 2.0**k <= rs]
    if name == "threshold":
        scale, safe_n, ez = _clock(cfg, g)
        ns = _n_list(cfg, safe_n)
        ns = ns[ns > 0]
        K = _kernel(cfg, g, V)
        base = g.interior(rs) if cfg.base == "interior" else None
        rep = verify.verify_threshold(K, V, ns, base, scale=scale, band_tol=cfg.band_tol,
                                      slope_target=cfg.slope_target, slope_tol=cfg.slope_tol,
                                      method=cfg.method, workers=cfg.workers)
        rep.constants.pop("psi")
        return rep
    if name == "resistance":
        return verify.verify_resistance_band(g, gamma, [r for r in r_grid if 2 * r <= rs], V,
                                             seed=cfg.seed, band_tol=cfg.band_tol)
    if name == "subgaussian":
        kind = "Q" if cfg.kernel == "lazy" else "P_pair"
        return verify.verify_subgaussian(g, kind, gamma, V, seed=cfg.seed)
    if name in ("pseudo_poincare", "nash"):
        K = _kernel(cfg, g, V)
        ez = EtaZeta(_profile(cfg), gamma, eta_max=1e6)
        fam = verify.test_functions(K, seed=cfg.seed, radii=[r for r in (1, 2, 4, 8) if 2 * r <= rs])
        if name == "nash":
            return verify.verify_nash(K, ez, V, fam, band_tol=cfg.band_tol)
        return verify.verify_pseudo_poincare(K, ez, r_grid, fam, band_tol=cfg.band_tol)
    if name == "lower_bound":
        K = _kernel(cfg, g, V)
        x = int(np.argmax(g.boundary_distance()))
        _, safe_n, _ = _clock(cfg, g)
        ns = _n_list(cfg, safe_n)
        return verify.verify_lower_bound_mechanics(K, x, r_grid, ns)
    if name in ("dircomp", "noninc"):
        K = _kernel(cfg, g, V)
        fs = verify.random_functions(g.n, 50, seed=cfg.seed)
        return verify.check_dircomp(K, fs) if name == "dircomp" else verify.check_noninc(K, fs)
    if name == "moment":
        levels = cfg.levels or (cfg.level - 2, cfg.level - 1, cfg.level)
        graphs = [_graph(cfg, L) for L in levels]
        vols = [_volume(cfg, h) for h in graphs]
        prof = _profile(cfg)
        ez = EtaZeta(prof, gamma, eta_max=1e6)
        expect = "bounded" if prof.beta > gamma else "growing"
        return verify.verify_moment_threshold(graphs, prof, gamma, vols, ez, expect=expect,
                                              spread_tol=cfg.spread_tol, band_tol=cfg.band_tol)
    if name == "evidence":
        Q = lazy_pair(natural_walk(g))
        beta = cfg.beta0 * gamma
        ts = [2.0**k for k in range(0, 20) if 2.0 ** (k / beta) <= rs]
        rep = evidence_band_check(g, Q, ts, cfg.beta0, gamma, g.interior(rs), rs)
        ok = rep.spread <= cfg.band_tol
        return verify.ConstantReport("evidence", rep.grid, {"spread": rep.spread},
                                     {"min": rep.ratio_min, "max": rep.ratio_max}, passed=ok,
                                     family=f"stable(beta0={cfg.beta0:g})")
    if name == "poisson":
        x = int(np.argmax(g.boundary_distance()))
        us = [u for u in (4.0, 16.0, 64.0, 256.0) if u ** (1.0 / gamma) <= rs]
        mx, ratios = poisson_volume_bound_check(g, x, gamma, us)
        ok = ratios.max() / ratios.min() <= cfg.band_tol
        return verify.ConstantReport("poisson", {"u": us, "x": x}, {"max_ratio": mx},
                                     {"min": float(ratios.min()), "max": float(ratios.max())},
                                     passed=bool(ok))
    raise ConfigError(f"unknown inequality id {name!r}")


def cmd_verify(cfg):
    g = _graph(cfg)
    V = _volume(cfg, g)
    reports = [_run_check(cfg, name, g, V) for name in cfg.checks]
    out = cfg.output_dir()
    _write_json(out / "reports.json", [r.to_dict() for r in reports])
    failed = [r.inequality_id for r in reports if not r.passed]
    for r in reports:
        print(f"{r.inequality_id}: {'PASS' if r.passed else 'FAIL'}")
    if failed:
        print("failing: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def read_curve(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "n" not in rows[0] or "psi" not in rows[0]:
        raise ConfigError(f"{path} is not a decay curve CSV")
    n = np.array([float(r["n"]) for r in rows])
    p = np.array([float(r["psi"]) for r in rows])
    return n, p


def classify_regime(slope, alpha, gamma, beta=None, tol=0.1):
    """``"beta<gamma"``, ``"beta~gamma"`` or ``"beta>gamma"`` from a fitted slope.

    A slope clearly below the natural-walk value ``-alpha/gamma`` means jumps
    dominate.  Otherwise the walk is in the natural regime; the configured
    ``beta`` (if any) separates the borderline case from ``beta > gamma``.
    """
    if slope < -alpha / gamma - tol:
        return "beta<gamma"
    if beta is not None and abs(beta - gamma) <= 0.25:
        return "beta~gamma"
    return "beta>gamma"


def cmd_fit(cfg):
    path = Path(cfg.curve) if cfg.curve else cfg.output_dir() / "psi.csv"
    try:
        n, p = read_curve(path)
    except OSError as exc:
        raise ConfigError(f"cannot read curve {path}: {exc}") from exc
    keep = n > 0
    if keep.sum() < 5:
        raise ConfigError("curve too short for a fit (need >= 5 points with n > 0)")
    slope, se = verify.trimmed_slope(n[keep], p[keep])
    alpha, gamma = cfg.exponents()
    beta = cfg.beta if cfg.kernel in ("jump", "subordinated") else (
        cfg.beta0 * gamma if cfg.kernel == "stable" else None)
    res = {
        "slope": {"value": slope, "stderr": se},
        "alpha": alpha,
        "gamma": gamma,
        "beta": beta,
        "target_beta": -alpha / beta if beta else None,
        "target_gamma": -alpha / gamma,
        "regime": classify_regime(slope, alpha, gamma, beta),
        "points": int(keep.sum()),
    }
    _write_json(cfg.output_dir() / "fit.json", res)
    print(f"slope {slope:.4f} +- {se:.4f}  regime {res['regime']}")
    return 0


def cmd_report(cfg):
    out = cfg.output_dir()
    rows = []
    rep_file = out / "reports.json"
    if rep_file.exists():
        for r in json.loads(rep_file.read_text()):
            band = r.get("band") or {}
            slope = r.get("slope") or {}
            rows.append((r["inequality_id"], "pass" if r["pass"] else "fail", band.get("min", ""),
                         band.get("max", ""), slope.get("value", ""), r.get("violations", 0)))
    fit_file = out / "fit.json"
    if fit_file.exists():
        f = json.loads(fit_file.read_text())
        rows.append(("fit:" + f["regime"], "", "", "", f["slope"]["value"], ""))
    if not rows:
        raise ConfigError(f"nothing to report in {out}")
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "status", "band_min", "band_max", "slope", "violations"])
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    for row in rows:
        print("  ".join(str(v) for v in row))
    return 0


COMMANDS = {"gen": cmd_gen, "psi": cmd_psi, "verify": cmd_verify, "fit": cmd_fit,
            "report": cmd_report}


def build_parser():
    parser = argparse.ArgumentParser(prog="anomwalk", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="scenario file (key = value lines)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg)
    except UnsafeWindowError as exc:
        print(f"error: {exc} (safe bound {exc.safe_bound})", file=sys.stderr)
        return 2
    except (ConfigError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
