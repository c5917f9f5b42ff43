import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import connected, pivotal_by_flipping, rc_law
from potts_wall.random_cluster import (FREE, BondConfig, BoundaryWiring, Graph, GraphTooLarge,
                                       WeightProfile, connectivity, critical_beta, dual_beta,
                                       exact_measure, heat_bath_step, pivotal_edges, pivotal_table,
                                       run_chain, sample_chain, total_variation)


# ---------------------------------------------------------------- duality

def test_dual_beta_examples():
    assert dual_beta(math.log(3), 4) == pytest.approx(math.log(3), abs=1e-15)
    assert dual_beta(critical_beta(2), 2) == pytest.approx(critical_beta(2), abs=1e-15)
    assert dual_beta(math.log(2), 1) == pytest.approx(math.log(2), abs=1e-15)


@given(st.floats(0.05, 5.0), st.floats(1.0, 10.0))
def test_dual_beta_relation(beta, q):
    bs = dual_beta(beta, q)
    assert math.expm1(beta) * math.expm1(bs) == pytest.approx(q, rel=1e-12)
    assert dual_beta(bs, q) == pytest.approx(beta, rel=1e-10)


def test_dual_beta_rejects_nonpositive():
    with pytest.raises(ValueError):
        dual_beta(0.0, 2)


# ---------------------------------------------------------------- exact measure

small_graphs = st.integers(2, 6).flatmap(
    lambda n: st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                       .filter(lambda p: p[0] != p[1]).map(lambda p: tuple(sorted(p))),
                       min_size=1, max_size=8, unique=True).map(lambda ps: Graph.from_pairs(n, ps)))


def test_single_edge_open_probability():
    g = Graph.from_pairs(2, [(0, 1)])
    for w, q in [(1.0, 2.0), (0.3, 1.0), (5.0, 3.5)]:
        m = exact_measure(g, WeightProfile(q, [w]))
        assert m.probs[1] == pytest.approx(w / (w + q), rel=1e-14)


@given(small_graphs, st.floats(1.0, 4.0), st.data())
def test_exact_measure_matches_networkx(g, q, data):
    w = data.draw(st.lists(st.floats(0.0, 3.0), min_size=g.n_edges, max_size=g.n_edges))
    m = exact_measure(g, WeightProfile(q, w))
    ref = rc_law(g.n_vertices, g.edges, w, q)
    assert m.probs.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(m.probs, ref, atol=1e-12)


@given(small_graphs, st.data())
def test_q1_is_product(g, data):
    w = np.array(data.draw(st.lists(st.floats(0.0, 3.0), min_size=g.n_edges, max_size=g.n_edges)))
    m = exact_measure(g, WeightProfile(1.0, w))
    np.testing.assert_allclose(m.edge_marginals(), w / (1 + w), atol=1e-12)
    masks = np.arange(1 << g.n_edges)
    bits = (masks[:, None] >> np.arange(g.n_edges)) & 1
    prod = np.prod(np.where(bits, w / (1 + w), 1 / (1 + w)), axis=1)
    np.testing.assert_allclose(m.probs, prod, atol=1e-12)


@given(small_graphs, st.floats(1.0, 4.0), st.randoms(use_true_random=False))
def test_relabeling_invariance(g, q, rnd):
    w = np.linspace(0.2, 2.0, g.n_edges)
    perm = list(range(g.n_edges))
    rnd.shuffle(perm)
    g2 = Graph(g.vertices, tuple(g.edges[k] for k in perm))
    m1 = exact_measure(g, WeightProfile(q, w))
    m2 = exact_measure(g2, WeightProfile(q, w[perm]))
    masks = np.arange(1 << g.n_edges)
    # mask in the permuted labelling -> mask in the original
    back = np.zeros_like(masks)
    for new, old in enumerate(perm):
        back |= ((masks >> new) & 1) << old
    np.testing.assert_allclose(m2.probs, m1.probs[back], atol=1e-13)


def test_zero_weight_edge_closed():
    g = Graph.from_pairs(3, [(0, 1), (1, 2)])
    m = exact_measure(g, WeightProfile(2.0, [0.0, 1.0]))
    assert m.edge_marginals()[0] == 0.0


def test_wiring_counts_blocks_once():
    # two vertices wired together, edge between them: behaves as "endpoints already joined"
    g = Graph.from_pairs(2, [(0, 1)])
    m = exact_measure(g, WeightProfile(2.0, [1.0]), BoundaryWiring(((0, 1),)))
    assert m.probs[1] == pytest.approx(0.5)


def test_size_limit():
    g = Graph.box(0, 4, 0, 3)
    assert g.n_edges > 22
    with pytest.raises(GraphTooLarge):
        exact_measure(g, WeightProfile.uniform(g, 0.5, 2))


def test_fkg_pairs_3x3_box():
    from potts_wall.coupling import fkg_pair_check

    g = Graph.box(0, 2, 0, 2)   # 12 edges; a 3x3 vertex box
    m = exact_measure(g, WeightProfile.uniform(g, 0.8, 2))
    assert fkg_pair_check(m) >= -1e-15


def test_wall_profile():
    g = Graph.box(-1, 1, -1, 1)
    w = WeightProfile.wall(g, 0.7, 2.0, J=2.0, a=0.1)
    for k, (i, j) in enumerate(g.edges):
        yi, yj = g.vertices[i][1], g.vertices[j][1]
        if min(yi, yj) < 0:
            assert w.weights[k] == 0.1
        elif yi == yj == 0:
            assert w.weights[k] == pytest.approx(math.expm1(1.4))
        else:
            assert w.weights[k] == pytest.approx(math.expm1(0.7))


# ---------------------------------------------------------------- heat bath

def test_heat_bath_conditional_joined(rng):
    # 4-cycle with three edges open: the fourth has endpoints joined off it
    g = Graph.from_pairs(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    w = WeightProfile(2.0, [1.5] * 4)
    cfg = BondConfig(g, [True, True, True, False])
    k = 3
    hits = sum(heat_bath_step(cfg, k, w, rng).open[k] for _ in range(20000))
    p = 1.5 / 2.5
    assert abs(hits / 20000 - p) < 4 * math.sqrt(p * (1 - p) / 20000)
    # exact conditional from the enumerated measure
    m = exact_measure(g, w)
    assert m.probs[0b1111] / (m.probs[0b1111] + m.probs[0b0111]) == pytest.approx(p)


def test_heat_bath_conditional_isolated(rng):
    g = Graph.from_pairs(2, [(0, 1)])
    w = WeightProfile(2.0, [1.0])
    cfg = BondConfig(g, [False])
    hits = sum(heat_bath_step(cfg, 0, w, rng).open[0] for _ in range(30000))
    assert abs(hits / 30000 - 1 / 3) < 4 * math.sqrt(2 / 9 / 30000)


def test_heat_bath_zero_weight(rng):
    g = Graph.from_pairs(2, [(0, 1)])
    cfg = BondConfig(g, [True])
    for _ in range(100):
        assert not heat_bath_step(cfg, 0, WeightProfile(2.0, [0.0]), rng).open[0]


def test_chain_q1_independent(rng):
    g = Graph.box(0, 2, 0, 1)
    w = WeightProfile(1.0, np.linspace(0.2, 3.0, g.n_edges))
    _, counts = run_chain(g, w, 100000, rng, record=True)
    masks = np.arange(counts.size)
    freq = np.array([counts[(masks >> k) & 1 == 1].sum() for k in range(g.n_edges)]) / counts.sum()
    p = w.weights / (1 + w.weights)
    assert np.all(np.abs(freq - p) < 5 * np.sqrt(p * (1 - p) / 100000) + 0.01)


def test_chain_zero_weight_lower_edges(rng):
    g = Graph.box(-1, 1, -1, 1)
    w = WeightProfile.wall(g, 0.9, 2.0, a=0.0)
    lower = w.weights == 0
    for _ in range(20):
        c = sample_chain(g, w, FREE, 50, rng)
        assert not np.any(c.open[lower])


def test_chain_deterministic():
    g = Graph.box(0, 2, 0, 2)
    w = WeightProfile.uniform(g, 0.9, 2.0)
    a = sample_chain(g, w, FREE, 200, np.random.default_rng(5))
    b = sample_chain(g, w, FREE, 200, np.random.default_rng(5))
    assert np.array_equal(a.open, b.open)


def test_chain_requires_sweeps(rng):
    g = Graph.box(0, 1, 0, 1)
    with pytest.raises(ValueError):
        sample_chain(g, WeightProfile.uniform(g, 1, 2), FREE, 0, rng)


@pytest.mark.slow
def test_chain_converges_on_small_graphs(rng):
    """Scan chain after 10^6 sweeps within 0.02 TV of the exact law (<= 10 edges)."""
    cases = [Graph.from_pairs(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]),
             Graph.box(0, 2, 0, 1),
             Graph.from_pairs(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3), (0, 2), (2, 4)])]
    for g in cases:
        w = WeightProfile(2.0, np.linspace(0.5, 2.5, g.n_edges))
        _, counts = run_chain(g, w, 10**6, rng, record=True)
        tv = total_variation(counts / counts.sum(), exact_measure(g, w).probs)
        assert tv < 0.02, (g.n_edges, tv)


def test_chain_respects_wiring(rng):
    # wiring 0 and 2 makes the middle-free edge behave as in a cycle
    g = Graph.from_pairs(3, [(0, 1), (1, 2)])
    wiring = BoundaryWiring(((0, 2),))
    w = WeightProfile(2.0, [1.0, 1.0])
    _, counts = run_chain(g, w, 200000, rng, wiring, record=True)
    tv = total_variation(counts / counts.sum(), exact_measure(g, w, wiring).probs)
    assert tv < 0.01


# ---------------------------------------------------------------- connectivity and pivotality

def test_connectivity_examples():
    g = Graph.box(0, 2, 0, 2)
    allopen = BondConfig(g, np.ones(g.n_edges, bool))
    closed = BondConfig(g, np.zeros(g.n_edges, bool))
    assert connectivity(allopen, (0, 0), (2, 2))
    assert not connectivity(closed, (0, 0), (2, 2))
    assert connectivity(closed, (1, 1), (1, 1))


def test_pivotal_single_path():
    g = Graph.from_pairs(4, [(0, 1), (1, 2), (2, 3)])
    c = BondConfig(g, [True, True, True])
    assert pivotal_edges(c, 0, 3) == {0, 1, 2}


def test_pivotal_two_disjoint_paths():
    g = Graph.from_pairs(4, [(0, 1), (1, 3), (0, 2), (2, 3)])
    c = BondConfig(g, [True] * 4)
    assert pivotal_edges(c, 0, 3) == set()


def test_pivotal_closed_joining_edge():
    g = Graph.from_pairs(4, [(0, 1), (1, 2), (2, 3)])
    c = BondConfig(g, [True, False, True])
    assert pivotal_edges(c, 0, 3) == {1}
    assert pivotal_edges(c, 0, 1) == {0}


def test_pivotal_lattice_labels():
    g = Graph.box(0, 2, 0, 0)
    c = BondConfig(g, [True, True])
    assert pivotal_edges(c, (0, 0), (2, 0)) == {0, 1}


@given(small_graphs, st.data())
def test_pivotal_matches_flipping(g, data):
    mask = data.draw(st.integers(0, (1 << g.n_edges) - 1))
    u = data.draw(st.integers(0, g.n_vertices - 1))
    v = data.draw(st.integers(0, g.n_vertices - 1))
    c = BondConfig.from_mask(g, mask)
    assert pivotal_edges(c, u, v) == pivotal_by_flipping(g.n_vertices, g.edges, mask, u, v)
    # non-pivotal flips never change the event
    base = connected(g.n_vertices, g.edges, mask, u, v)
    for k in set(range(g.n_edges)) - pivotal_edges(c, u, v):
        assert connected(g.n_vertices, g.edges, mask ^ (1 << k), u, v) == base


@given(small_graphs, st.data())
def test_pivotal_on_event_are_open_bridges(g, data):
    import networkx as nx

    mask = data.draw(st.integers(0, (1 << g.n_edges) - 1))
    u, v = 0, g.n_vertices - 1
    if not connected(g.n_vertices, g.edges, mask, u, v) or u == v:
        return
    G = nx.Graph()
    G.add_nodes_from(range(g.n_vertices))
    G.add_edges_from(e for k, e in enumerate(g.edges) if (mask >> k) & 1)
    comp = nx.node_connected_component(G, u)
    H = G.subgraph(comp)
    # open bridges whose removal separates u from v
    sep = set()
    for a, b in nx.bridges(H):
        H2 = nx.Graph(H)
        H2.remove_edge(a, b)
        if not nx.has_path(H2, u, v):
            sep.add(g.edges.index(tuple(sorted((a, b)))))
    assert pivotal_edges(BondConfig.from_mask(g, mask), u, v) == sep


def test_pivotal_table_consistent():
    g = Graph.box(0, 1, 0, 1)
    pairs = np.array([[0, 3], [1, 2]])
    tab = pivotal_table(g, pairs)
    for mask in range(1 << g.n_edges):
        c = BondConfig.from_mask(g, mask)
        for j, (u, v) in enumerate(pairs):
            got = {k for k in range(g.n_edges) if (tab[mask, j] >> k) & 1}
            assert got == pivotal_edges(c, g.vertices[u], g.vertices[v])


def test_bk_pivotal_desk_check():
    from potts_wall.random_cluster import bk_pivotal_check

    g = Graph.box(0, 2, 0, 1)
    w = WeightProfile.uniform(g, 0.6, 2.0)
    x, y = g.index((0, 0)), g.index((2, 0))
    for k in range(g.n_edges):
        lhs, rhs = bk_pivotal_check(g, w, x, y, k)
        assert lhs <= rhs + 1e-12


# ---------------------------------------------------------------- serialization

@given(small_graphs, st.data())
def test_bondconfig_roundtrips(g, data):
    mask = data.draw(st.integers(0, (1 << g.n_edges) - 1))
    c = BondConfig.from_mask(g, mask)
    assert c.to_mask() == mask
    assert BondConfig.from_bytes(g, c.to_bytes()).to_mask() == mask
    assert BondConfig.from_text(g, c.to_text()).to_mask() == mask


def test_bondconfig_text_lattice():
    g = Graph.box(0, 1, 0, 0)
    c = BondConfig(g, [True])
    assert c.to_text().strip() == "0 0 1 0"


def test_bondconfig_length_checked():
    g = Graph.box(0, 1, 0, 1)
    with pytest.raises(ValueError):
        BondConfig(g, [True])
