import math

import numpy as np
import pytest

from anomwalk.families import FamilySpec, generate
from anomwalk.graph import build_graph, fit_loglog_slope
from anomwalk.operators import lazy_pair, natural_walk
from anomwalk.stable import (
    adaptive_pmf,
    binomial_series,
    discrete_stable_pmf,
    evidence_band_check,
    local_volume,
    monte_carlo_check,
    poisson_volume_bound_check,
    sample_stable_subordinator,
    stable_kernel,
    stable_kernel_direct,
    tail_series,
)


def test_first_weight_and_series():
    w = discrete_stable_pmf(1.7, 0.4, 10)
    assert w.pmf[0] == math.exp(-1.7)
    # A(t, 1) = t beta0 exp(-t)
    assert w.pmf[1] == pytest.approx(1.7 * 0.4 * math.exp(-1.7), rel=1e-15)
    a = binomial_series(0.4, 5)
    assert a[:3].tolist() == pytest.approx([1.0, 0.6, 0.6 * 1.6 / 2])


def test_poisson_limit():
    w = discrete_stable_pmf(3.0, 1.0, 60)
    i = np.arange(61)
    poi = np.exp(-3.0 + i * math.log(3.0) - np.array([math.lgamma(k + 1) for k in i]))
    np.testing.assert_allclose(w.pmf, poi, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("beta0", [0.0, -0.3, 1.2])
def test_rejects_bad_index(beta0):
    with pytest.raises(ValueError):
        discrete_stable_pmf(1.0, beta0, 10)


def test_semigroup_convolution():
    t, s, b = 0.8, 1.3, 0.55
    n = 400
    a = discrete_stable_pmf(t, b, n).pmf
    c = discrete_stable_pmf(s, b, n).pmf
    ab = discrete_stable_pmf(t + s, b, n).pmf
    np.testing.assert_allclose(np.convolve(a, c)[: n + 1], ab, atol=1e-9)


@pytest.mark.parametrize("t,beta0,N", [(0.5, 0.3, 200), (2.0, 0.5, 1000), (5.0, 0.8, 400)])
def test_tail_matches_oracle(t, beta0, N):
    w = discrete_stable_pmf(t, beta0, N)
    assert w.tail_mass == pytest.approx(tail_series(t, beta0, N), rel=1e-6, abs=1e-14)


def test_tail_slope():
    w = discrete_stable_pmf(2.0, 0.5, 512)
    i = np.arange(32, 513)
    s, _ = fit_loglog_slope(i, w.pmf[i])
    assert s == pytest.approx(-1.5, abs=0.05)


def test_adaptive_truncation():
    # only the Poisson case has a light enough tail to finish early
    w = adaptive_pmf(1.0, 1.0, eps=1e-12)
    assert w.complete and w.tail_mass < 1e-12
    assert 1.0 - w.pmf[:-1].sum() >= 1e-12
    heavy = adaptive_pmf(3.0, 0.1, eps=1e-10, budget=1024)
    assert not heavy.complete and heavy.i_max == 1024


def test_sampler_laplace_transform():
    S = sample_stable_subordinator(1.5, 0.6, 400_000, np.random.default_rng(1))
    for s in (0.3, 1.0, 2.0):
        assert np.exp(-s * S).mean() == pytest.approx(math.exp(-1.5 * s**0.6), abs=3e-3)


def test_monte_carlo_small():
    stat, p, bins = monte_carlo_check(1.0, 0.6, samples=50_000, seed=5)
    assert bins > 5 and p > 1e-3


@pytest.fixture(scope="module")
def Q4():
    return lazy_pair(natural_walk(generate(FamilySpec("sierpinski_gasket", 4))))


def test_stable_kernel_markov(Q4):
    K = stable_kernel(Q4, 2.0, 0.6)
    asym, defect, lo = K.check()
    assert asym < 1e-15 and defect < 1e-12 and lo >= 0
    # the heavy tail outlasts the budget; the folded mass keeps rows stochastic
    assert K.flags.incomplete == (K.flags.tail_mass >= 1e-10)
    assert K.flags.truncation == 1 << 16


def test_two_vertex_closed_form():
    g = build_graph([(0, 1, 1.0)])
    Q = lazy_pair(natural_walk(g))
    t = 0.9
    K = stable_kernel(Q, t, 0.5)
    T = K.dense() * K.measure[None, :]
    e = math.exp(-t)
    np.testing.assert_allclose(T, 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]]), atol=1e-12)


def test_small_time_is_identity(Q4):
    K = stable_kernel(Q4, 1e-9, 0.5)
    np.testing.assert_allclose(K.dense() * K.measure[None, :], np.eye(Q4.size), atol=1e-8)


def test_incomplete_flag_and_closed_form(Q4):
    K = stable_kernel(Q4, 4.0, 0.2, budget=512)
    assert K.flags.incomplete and K.flags.tail_mass > 1e-10
    exact = stable_kernel(Q4, 4.0, 0.2, method="closed_form")
    # the truncated mixture is still a valid kernel, with error bounded by the folded tail
    assert np.abs(K.dense() - exact.dense()).max() * Q4.measure.max() <= 2 * K.flags.tail_mass + 1e-12


def test_mixture_vs_direct_and_closed_form(Q4):
    K = stable_kernel(Q4, 1.5, 0.7)
    D = stable_kernel_direct(Q4, 1.5, 0.7, K.flags.truncation)
    C = stable_kernel(Q4, 1.5, 0.7, method="closed_form")
    np.testing.assert_allclose(K.dense(), D.dense(), atol=1e-11)
    np.testing.assert_allclose(K.dense(), C.dense(), atol=1e-9)
    with pytest.raises(ValueError):
        stable_kernel(Q4, 1.0, 1.0)


def test_local_volume_real_radius():
    g = generate(FamilySpec("path", 20))
    assert local_volume(g, 10, 2.9) == local_volume(g, 10, 2) == 10


def test_poisson_volume_bound():
    box = generate(FamilySpec("lattice_box", 41, 2))
    mx, ratios = poisson_volume_bound_check(box, 20 * 41 + 20, 2.0, [0.0, 4, 16, 64])
    assert ratios[0] == 1.0 and np.isfinite(mx) and mx < 5.0
    gk = generate(FamilySpec("sierpinski_gasket", 6))
    _, ratios = poisson_volume_bound_check(gk, 0, math.log2(5), [4, 16, 64])
    assert ratios.max() / ratios.min() < 2.0


def test_evidence_band(Q4):
    g = Q4.graph
    rep = evidence_band_check(g, Q4, [2.0, 8.0], 0.6, math.log2(5), [0, 30], 4)
    assert 0 < rep.ratio_min <= rep.ratio_max < np.inf
    assert set(rep.as_dict()) == {"grid", "band", "spread"}
    with pytest.raises(ValueError):
        evidence_band_check(g, Q4, [2.0], 0.6, math.log2(5), [], 4)
