import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anomwalk.families import FamilySpec, generate
from anomwalk.graph import (
    GraphError,
    UnsafeWindowError,
    ball_average,
    ball_volume,
    ball_volumes,
    build_graph,
    diagnostics,
    fit_loglog_slope,
    format_graph,
    parse_graph,
    read_graph,
    volume_profile,
    write_graph,
)


def test_rejects_bad_input():
    with pytest.raises(GraphError):
        build_graph([])
    with pytest.raises(GraphError):
        build_graph([(0, 1, 0.0)])
    with pytest.raises(GraphError):
        build_graph([(0, 1, -1.0)])
    with pytest.raises(GraphError):
        build_graph([(0, 0, 1.0), (0, 1, 1.0)])


def test_disconnected_reports_sizes():
    with pytest.raises(GraphError, match=r"sizes \[3, 2\]"):
        build_graph([(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)])


def test_duplicate_edges_merge():
    g = build_graph([(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0)])
    assert g.num_edges == 2
    assert g.measure.tolist() == [3.0, 4.0, 1.0]


def test_measure_is_weighted_degree():
    g = generate(FamilySpec("sierpinski_gasket", 3, perturb_seed=1))
    assert g.total_measure == pytest.approx(2 * g.w.sum(), rel=1e-14)


def test_path_distances_and_volume():
    g = generate(FamilySpec("path", 20))
    assert g.distances_from(0).tolist() == list(range(21))
    # interior vertices carry mu = 2, so V(10, r) = 2(2r+1)
    for r in range(0, 9):
        assert ball_volume(g, 10, r) == 2 * (2 * r + 1)
    np.testing.assert_array_equal(ball_volumes(g, 10, 5), [2, 6, 10, 14, 18, 22])


def test_ball_average_conventions():
    g = generate(FamilySpec("cycle", 8))
    f = np.zeros(8)
    f[0] = 1.0
    np.testing.assert_array_equal(ball_average(g, f, 0.5), f)
    np.testing.assert_allclose(ball_average(g, np.full(8, 3.0), 2), 3.0)
    # hand enumeration: balls of radius 1 hold three vertices of mass 2
    expect = np.zeros(8)
    expect[[7, 0, 1]] = 1.0 / 3.0
    np.testing.assert_allclose(ball_average(g, f, 1), expect, atol=1e-15)


def test_volume_profile_fixed_gasket_corner():
    g = generate(FamilySpec("sierpinski_gasket", 6))
    V = volume_profile(g, base="fixed", base_vertex=0)
    # balls around the origin corner of the one-sided infinite gasket
    assert [V(2**k) for k in range(7)] == [10, 22, 58, 166, 490, 1462, 4374]


def test_volume_profile_monotone_and_inverse():
    g = generate(FamilySpec("lattice_box", 21, 2))
    V = volume_profile(g)
    r = np.linspace(0, 30, 301)
    v = V(r)
    assert np.all(np.diff(v) > 0)
    np.testing.assert_allclose(V.inverse(v), r, atol=1e-9)


def test_volume_profile_tiny_graph():
    V = volume_profile(generate(FamilySpec("sierpinski_gasket", 0)))
    assert V(0) == 2 and V(1) == 6


def test_diagnostics_lattice():
    g = generate(FamilySpec("lattice_box", 41, 2))
    d = diagnostics(g, [2, 4, 8])
    assert d.p0 == 0.25
    # hop balls are diamonds: V(r) = 4 (2r^2 + 2r + 1), slope tends to 2 slowly
    V = lambda r: 4 * (2 * r * r + 2 * r + 1)
    s, _ = fit_loglog_slope([2, 4, 8], [V(2), V(4), V(8)])
    assert d.alpha_fit == pytest.approx(s, rel=1e-12)
    assert d.C_D <= 4.5
    assert d.reverse_doubling[1] > 0


def test_diagnostics_rejects_unsafe_grid():
    g = generate(FamilySpec("sierpinski_gasket", 4))
    with pytest.raises(UnsafeWindowError) as exc:
        diagnostics(g, [2, 4, 8])
    assert exc.value.safe_bound == g.safe_radius()


def test_safe_radius_gasket():
    g = generate(FamilySpec("sierpinski_gasket", 6))
    assert g.diameter() == 64
    assert g.safe_radius() == 16


def test_slope_fit_exact_power():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    s, se = fit_loglog_slope(x, 3 * x**1.7)
    assert s == pytest.approx(1.7, abs=1e-12)
    assert se < 1e-10


def test_interchange_roundtrip(tmp_path):
    g = generate(FamilySpec("vicsek_tree", 2, perturb_seed=4))
    path = tmp_path / "g.txt"
    write_graph(g, path)
    h = read_graph(path)
    assert format_graph(h) == path.read_text()
    np.testing.assert_array_equal(h.measure, g.measure)


def test_parse_requires_header():
    with pytest.raises(GraphError):
        parse_graph("0 1 1.0\n")


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 25))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    edges = [(i, p, draw(st.floats(0.1, 10))) for i, p in zip(range(1, n), parents)]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20))
    edges += [(a, b, 1.0) for a, b in extra if a != b]
    return build_graph(edges, n=n)


@settings(max_examples=40, deadline=None)
@given(connected_graphs())
def test_distance_metric_properties(g):
    D = g.distance_matrix()
    assert np.all(D == D.T)
    assert np.all(np.diag(D) == 0)
    # triangle inequality through every intermediate vertex
    for k in range(g.n):
        assert np.all(D <= D[:, [k]] + D[[k], :])
    assert g.total_measure == pytest.approx(2 * g.w.sum())


@settings(max_examples=30, deadline=None)
@given(connected_graphs(), st.integers(0, 5))
def test_ball_volume_monotone(g, x):
    x = x % g.n
    v = ball_volumes(g, x, g.n)
    assert np.all(np.diff(v) >= 0)
    assert v[-1] == pytest.approx(g.total_measure)
