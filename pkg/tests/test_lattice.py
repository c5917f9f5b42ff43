import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from potts_wall.lattice import (Cone, ConfigurationError, Edge, box_edges, build_geometry,
                                cone_contains, dual_edge)


def test_geometry_small_box_rejected():
    # floor(2 * 4^0.8) = 6 > N, so the repulsion rectangle is empty
    with pytest.raises(ConfigurationError):
        build_geometry(4, 0.1)


def test_geometry_n64_bounds():
    g = build_geometry(64, 0.05)
    s = math.floor(2 * 64 ** 0.4)
    assert (g.delta.x0, g.delta.x1) == (-64 + s, 64 - s)
    assert (g.delta.y0, g.delta.y1) == (0, math.floor(64 ** 0.05))
    assert (g.delta.x0, g.delta.x1, g.delta.y1) == (-54, 54, 1)


def test_vertex_counts():
    g = build_geometry(16, 0.05)
    assert g.n_upper_vertices == 33 * 17
    assert len(list(g.upper_vertices())) == g.n_upper_vertices
    from potts_wall.lattice import Geometry
    assert Geometry(4, 0.01).n_upper_vertices == 45


def test_marked_vertices():
    g = build_geometry(32, 0.05)
    assert g.upper_box.contains(g.v_left) and g.upper_box.contains(g.v_right)
    assert g.v_left == (-32, 0) and g.v_right == (32, 0)


@pytest.mark.parametrize("N,eps", [(4, 0.2), (3, 0.01), (8, 0.0), (16, 0.124)])
def test_geometry_rejects(N, eps):
    with pytest.raises(ConfigurationError):
        build_geometry(N, eps)


@given(st.integers(5, 400), st.floats(0.001, 0.124))
def test_rectangles_nested(N, eps):
    try:
        g = build_geometry(N, eps)
    except ConfigurationError:
        return
    assert g.delta.issubset(g.delta_tilde)
    assert g.delta_tilde.issubset(g.upper_box)
    assert not g.delta.empty


def test_dual_edge_examples():
    h = Edge.primal((0, 0), (1, 0))
    assert dual_edge(h).endpoints() == ((Fraction(1, 2), Fraction(-1, 2)), (Fraction(1, 2), Fraction(1, 2)))
    v = Edge.primal((0, 0), (0, 1))
    assert dual_edge(v).endpoints() == ((Fraction(-1, 2), Fraction(1, 2)), (Fraction(1, 2), Fraction(1, 2)))
    assert not dual_edge(h).is_primal


@pytest.mark.parametrize("N", range(1, 9))
def test_dual_edge_involution_exhaustive(N):
    for e in box_edges(-N, N, -N, N):
        d = dual_edge(e)
        assert d != e and dual_edge(d) == e
        assert d.is_horizontal != e.is_horizontal


def test_box_edges_canonical():
    edges = box_edges(0, 2, 0, 1)
    assert edges == sorted(edges)
    assert len(edges) == 2 * 2 + 3 * 1
    for e in edges:
        assert e.a < e.b


def test_cone_examples():
    assert cone_contains(Cone((0, 0), True), (1, 1))
    assert not cone_contains(Cone((0, 0), True), (0, 1))
    assert cone_contains(Cone((2, 0), False), (1, 1))
    assert cone_contains(Cone((0, 0), True), (0, 0))


def test_cone_aperture_exact():
    c = Cone((0, 0), True, Fraction(1, 3))
    assert cone_contains(c, (3, 1))
    assert not cone_contains(c, (3, 2))


coords = st.integers(-50, 50)


@given(coords, coords, coords, coords, st.booleans(),
       st.fractions(min_value=Fraction(1, 10), max_value=5))
def test_cone_vertical_reflection(ax, ay, px, py, fwd, ap):
    c = Cone((ax, ay), fwd, ap)
    assert cone_contains(c, (px, py)) == cone_contains(c, (px, 2 * ay - py))


@given(coords, coords, coords, coords)
def test_forward_backward_mirror(ax, ay, px, py):
    assert cone_contains(Cone((ax, ay), True), (px, py)) == cone_contains(Cone((ax, ay), False), (2 * ax - px, py))


def test_describe_roundtrip():
    g = build_geometry(64, 0.05)
    d = g.describe()
    assert d["N"] == 64 and d["delta"] == [g.delta.x0, g.delta.x1, g.delta.y0, g.delta.y1]
