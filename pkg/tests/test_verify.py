import json
import math

import numpy as np
import pytest

import anomwalk.verify as vf
from anomwalk.asymptotics import EtaZeta, JumpProfile
from anomwalk.cli import classify_regime
from anomwalk.families import FamilySpec, generate, reference_profile
from anomwalk.graph import UnsafeWindowError, volume_profile
from anomwalk.operators import jump_kernel, lazy_pair, natural_walk, subordinated_kernel

GAMMA = math.log2(5)
ALPHA = math.log2(3)


@pytest.fixture(scope="module")
def g5(gasket5):
    return gasket5


@pytest.fixture(scope="module")
def jump5(g5):
    return jump_kernel(g5, JumpProfile(1.5), reference_profile(g5))


def test_report_schema():
    rep = vf.ConstantReport("x", {"n": np.arange(2)}, constants={"c": np.float64(1.5)})
    d = json.loads(rep.to_json())
    assert set(d) == {"inequality_id", "grid", "constants", "band", "slope", "violations",
                      "pass", "family", "notes"}
    assert d["grid"]["n"] == [0, 1] and d["pass"] is True


def test_trimmed_slope():
    n = np.arange(1, 41)
    y = n**-0.75
    y[0] = y[-1] = 1e6
    s, _ = vf.trimmed_slope(n, y)
    assert s == pytest.approx(-0.75, abs=1e-12)
    with pytest.raises(ValueError):
        vf.trimmed_slope([1, 2], [1, 1])


def test_lemmas_hold(g5, jump5):
    P = natural_walk(g5)
    fs = [f for _, f in vf.test_functions(P, radii=(1, 2, 4))]
    for K in (P, lazy_pair(P), jump5):
        assert vf.check_dircomp(K, fs).violations == 0
        assert vf.check_noninc(K, fs).violations == 0


def test_lemmas_reject_zero(jump5):
    with pytest.raises(ValueError):
        vf.check_dircomp(jump5, [np.zeros(jump5.size)])
    with pytest.raises(ValueError):
        vf.check_noninc(jump5, [np.zeros(jump5.size)])


def test_test_function_family(g5):
    P = natural_walk(g5)
    fam = vf.test_functions(P, radii=(1, 2), n_random=3, n_eigen=2)
    ids = [fid for fid, _ in fam]
    assert sum(i.startswith("ball") for i in ids) == 2
    assert sum(i.startswith("harmonic") for i in ids) == 2
    assert sum(i.startswith("eigen") for i in ids) == 2
    ball = dict(fam)[ids[0]]
    assert np.sum(ball * P.measure) == pytest.approx(1.0)


def test_pseudo_poincare(g5, jump5):
    ez = EtaZeta(JumpProfile(1.5), GAMMA, eta_max=1e4)
    fam = vf.test_functions(jump5, radii=(1, 2, 4))
    rep = vf.verify_pseudo_poincare(jump5, ez, [1, 2, 4, 8], fam)
    assert rep.passed and np.isfinite(rep.constants["C_needed"])
    with pytest.raises(UnsafeWindowError):
        vf.verify_pseudo_poincare(jump5, ez, [64], fam)


def test_nash_and_scale_invariance(g5, jump5):
    ez = EtaZeta(JumpProfile(1.5), GAMMA, eta_max=1e6)
    V = reference_profile(g5)
    fam = vf.test_functions(jump5, radii=(1, 2, 4))
    rep = vf.verify_nash(jump5, ez, V, fam)
    assert rep.passed
    assert rep.constants["C2"] == pytest.approx(V(1.0) / g5.measure.min())
    scaled = vf.verify_nash(jump5, ez, V, [(i, 7.5 * f) for i, f in fam])
    for k, v in rep.constants["per_f"].items():
        assert scaled.constants["per_f"][k] == pytest.approx(v, rel=1e-9)


def test_resistance_band_path():
    g = generate(FamilySpec("path", 200))
    V = lambda r: 2 * (2 * np.floor(r) + 1)
    rep = vf.verify_resistance_band(g, 2.0, [2, 4, 8], V, samples=3)
    # two parallel branches of r+1 unit edges each
    for (_, r, Rp, Rq), ratio in zip(rep.constants["solves"], rep.constants["ratios"]):
        assert Rp == pytest.approx((r + 1) / 2, rel=1e-9)
        assert ratio == pytest.approx((r + 1) * (2 * r + 1) / r**2, rel=1e-9)
    assert rep.violations == 0 and rep.passed
    assert 2 / 3 - 1e-9 <= rep.constants["lres_min"] <= rep.constants["lres_max"] <= 2


def test_subgaussian_lattice_and_gasket(g5):
    box = generate(FamilySpec("lattice_box", 41, 2))
    rep = vf.verify_subgaussian(box, "Q", 2.0, volume_profile(box), n_grid=[1, 4, 16, 64])
    assert rep.passed and rep.constants["c_lower"] > 0
    # the classical Gaussian regime gives moderate constants
    assert rep.constants["C_upper"] < 50
    rep = vf.verify_subgaussian(g5, "P_pair", GAMMA, reference_profile(g5), n_grid=[2, 8, 32])
    assert rep.passed and "bipartite graph" not in rep.notes
    with pytest.raises(ValueError):
        vf.verify_subgaussian(g5, "R", GAMMA, reference_profile(g5))


def test_lambda_ball(g5):
    Q = lazy_pair(natural_walk(g5))
    assert vf.lambda_ball(Q, 0, g5.diameter()) == pytest.approx(1.0, abs=1e-9)
    vals = [vf.lambda_ball(Q, 100, r) for r in (0, 1, 2, 4, 8)]
    assert np.all(np.diff(vals) >= -1e-12)
    for r in (1, 3):
        assert vf.lambda_ball(Q, 100, r) == pytest.approx(
            vf.lambda_ball(Q, 100, r, return_dense=True), rel=1e-8)


def test_lower_bound_mechanics(g5):
    S = subordinated_kernel(lazy_pair(natural_walk(g5)), JumpProfile(1.0), GAMMA)
    ez = EtaZeta(JumpProfile(1.0), GAMMA, eta_max=1e4)
    rep = vf.verify_lower_bound_mechanics(S, 0, [1, 2, 4, 8], [1, 2, 4, 8, 16], ez)
    assert rep.violations == 0 and rep.passed
    assert rep.constants["sharpness_max"] >= 1


def test_threshold_requires_window(jump5):
    with pytest.raises(UnsafeWindowError, match="empty n window"):
        vf.verify_threshold(jump5, lambda r: r, [], gamma=GAMMA)
    with pytest.raises(ValueError):
        vf.verify_threshold(jump5, lambda r: r, [1, 2], gamma=GAMMA, scale=np.sqrt)


def test_threshold_one_dimensional_log_correction():
    # beta = gamma = 2 on a path: psi(n) ~ (n log n)^(-1/2)
    g = generate(FamilySpec("path", 1000))
    V = volume_profile(g)
    K = jump_kernel(g, JumpProfile(2.0), V)
    n = np.unique(np.geomspace(16, 1024, 13).astype(int))
    base = g.interior(g.safe_radius())[::50]
    rep = vf.verify_threshold(K, V, n, base, scale=lambda n: np.sqrt(n * np.log(n)),
                              band_tol=1.2, method="spectral")
    assert rep.passed


def test_moment_needs_three_sizes(g5):
    with pytest.raises(ValueError):
        vf.verify_moment_threshold([g5, g5], JumpProfile(1.0), GAMMA, [None, None], None)


@pytest.mark.parametrize(
    "slope,beta,expect",
    [(-1.5, 1.0, "beta<gamma"), (-0.68, 4.0, "beta>gamma"), (-0.7, 2.4, "beta~gamma"),
     (-0.7, None, "beta>gamma")],
)
def test_classify_regime(slope, beta, expect):
    assert classify_regime(slope, ALPHA, GAMMA, beta) == expect
