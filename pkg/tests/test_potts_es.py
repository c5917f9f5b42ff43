import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import potts_dobrushin_law
from potts_wall.cluster_geometry import connected_arrays
from potts_wall.lattice import build_geometry
from potts_wall.potts_es import (PottsSampler, SpinConfig, edwards_sokal_interface, es_bernoulli,
                                 es_box_chain, peierls_contained, sample_interface_cluster,
                                 sample_potts_dobrushin, wall_beta_star_for)
from potts_wall.random_cluster import (Graph, WeightProfile, critical_beta, dual_beta, exact_measure,
                                       total_variation)

BC2 = critical_beta(2)


def _sampler(W=4, H=3, bs=2 * BC2, q=2, seed=1, **kw):
    return PottsSampler(W, H, bs, q, np.random.default_rng(seed), x0=0, **kw)


def test_rejects_noninteger_q():
    with pytest.raises(ValueError):
        _sampler(q=2.5)


def test_warns_below_critical():
    with pytest.warns(UserWarning):
        _sampler(bs=0.5 * BC2)


@pytest.mark.parametrize("kind", ["sw", "glauber", "mixed"])
def test_boundary_frozen(kind):
    s = _sampler(W=6, H=4, q=3, bs=2 * critical_beta(3), kind=kind)
    for _ in range(50):
        s.sweep(3)
        sp = s.spins
        assert sp.boundary_ok()
        assert np.all((sp.colors >= 1) & (sp.colors <= 3))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["sw", "glauber", "mixed"]), st.integers(2, 4),
       st.integers(1, 6), st.integers(1, 5), st.floats(0.0, 3.0))
def test_boundary_never_modified_property(seed, kind, q, W, H, bs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = PottsSampler(W, H, bs, q, np.random.default_rng(seed), x0=0, kind=kind)
    s.sweep(5)
    assert s.spins.boundary_ok()
    out = s.es_output()
    assert peierls_contained(s.spins, out)
    assert connected_arrays(out, (0, 0), (W, 0))


@pytest.mark.parametrize("q", [2, 3])
def test_site_conditional_matches_enumeration(q):
    """Heat-bath conditional at one site equals the ratio of exact Gibbs weights."""
    W, H, bs = 2, 2, 1.3
    configs, probs = potts_dobrushin_law(W, H, bs, q)
    s = _sampler(W, H, bs, q, seed=3)
    rng = np.random.default_rng(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(5):
            c = configs[rng.integers(len(configs))]
            s.padded[1:-1, 1:-1] = c
            for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1)]:
                got = s.site_conditional(i + 1, j + 1)
                same = [np.all(np.delete(cc.ravel(), i * H + j) == np.delete(c.ravel(), i * H + j))
                        for cc in configs]
                sub = probs[np.array(same)]
                cols = configs[np.array(same)][:, i, j]
                want = np.array([sub[cols == k].sum() for k in range(1, q + 1)]) / sub.sum()
                np.testing.assert_allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("kind", ["sw", "glauber"])
def test_potts_law_on_tiny_box(kind):
    """Both sweep types leave the exact 2x2 Gibbs law invariant."""
    W, H, q, bs = 2, 2, 3, 1.2
    configs, probs = potts_dobrushin_law(W, H, bs, q)
    index = {tuple(c.ravel()): k for k, c in enumerate(configs)}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = _sampler(W, H, bs, q, seed=11, kind=kind)
    counts = np.zeros(len(configs))
    s.sweep(100)
    n = 60000
    for _ in range(n):
        s.sweep(1)
        counts[index[tuple(s.spins.colors.ravel())]] += 1
    assert total_variation(counts / n, probs) < 0.03


def test_beta_zero_uniform():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = _sampler(W=8, H=8, bs=0.0, q=3, kind="glauber")
    s.sweep(5)
    tot = np.zeros(3)
    for _ in range(200):
        s.sweep(1)
        tot += np.bincount(s.spins.colors.ravel(), minlength=4)[1:]
    np.testing.assert_allclose(tot / tot.sum(), [1 / 3] * 3, atol=0.02)


def test_low_temperature_ground_state():
    g = build_geometry(16, 0.05)
    sp = sample_potts_dobrushin(g, 3 * BC2, 2, 200, np.random.default_rng(4))
    # majority colour of the Dobrushin condition is the bulk colour 2
    assert np.mean(sp.colors == 2) > 0.95


def test_es_four_rules():
    s = _sampler(W=3, H=2, seed=2)
    s.padded[1:-1, 1:-1] = np.array([[1, 2], [1, 1], [2, 2]])
    sp = s.spins
    out = edwards_sokal_interface(sp, 2 * BC2, 2, np.random.default_rng(0))
    pad = sp.padded
    # unequal colours force the primal edge open
    assert peierls_contained(sp, out)
    # complementarity is built into the representation
    assert np.array_equal(out.vert_star, ~out.vert) and np.array_equal(out.horiz_star, ~out.horiz)
    # p* = 0: every equal-colour dual pair is closed, so the primal box is all open
    out0 = edwards_sokal_interface(sp, 0.0, 2, np.random.default_rng(0), parameter="dual")
    assert out0.vert.all() and out0.horiz.all()
    # p* = 1: only the Peierls contour is open
    from potts_wall.potts_es import _es_map
    vert = np.zeros((4, 2), bool)
    horiz = np.zeros((3, 3), bool)
    from potts_wall.rng import make_state
    _es_map(pad, 1.0, 1.0, make_state(np.random.default_rng(0)), vert, horiz)
    assert np.array_equal(vert, pad[:-1, 1:-1] != pad[1:, 1:-1])
    assert np.array_equal(horiz, pad[1:-1, :-1] != pad[1:-1, 1:])


def test_es_outside_edges_absent():
    # primal edges outside the box are never represented, i.e. closed
    s = _sampler(W=4, H=3)
    out = s.es_output()
    assert out.vert.shape == (5, 3) and out.horiz.shape == (4, 4)
    for e in out.primal_edges():
        (x1, y1), (x2, y2) = e.primal_endpoints()
        assert 0 <= x1 <= 4 and 0 <= x2 <= 4 and 0 <= y1 <= 3 and 0 <= y2 <= 3


def test_es_parameter_conventions():
    bs = 2 * BC2
    assert es_bernoulli(bs, 2) == pytest.approx(1 - math.exp(-bs))
    assert es_bernoulli(bs, 2, "literal") == pytest.approx(1 - math.exp(-dual_beta(bs, 2)))
    with pytest.raises(ValueError):
        es_bernoulli(bs, 2, "other")


def test_es_rejects_bad_boundary():
    s = _sampler()
    sp = s.spins
    sp.padded[0, 1] = 1
    with pytest.raises(ValueError):
        edwards_sokal_interface(sp, 1.0, 2, np.random.default_rng(0))


def test_interface_cluster_connected_n8():
    g = build_geometry(8, 0.02)
    rng = np.random.default_rng(7)
    s = PottsSampler.for_geometry(g, 2 * BC2, 2, rng, kind="mixed")
    for _ in range(300):
        s.sweep(1)
        sp = s.spins
        out = s.es_output()
        assert connected_arrays(out, g.v_left, g.v_right)
        assert peierls_contained(sp, out)
    out = sample_interface_cluster(g, 2 * BC2, 2, 20, rng)
    assert connected_arrays(out, g.v_left, g.v_right)


def test_es_replay_bit_for_bit():
    a = _sampler(W=6, H=4, seed=42, kind="mixed")
    b = _sampler(W=6, H=4, seed=42, kind="mixed")
    for _ in range(10):
        a.sweep(2)
        b.sweep(2)
        oa, ob = a.es_output(), b.es_output()
        assert np.array_equal(oa.vert, ob.vert) and np.array_equal(oa.horiz, ob.horiz)
        assert np.array_equal(a.spins.padded, b.spins.padded)


def test_es_map_deterministic_given_uniforms():
    s = _sampler(W=5, H=3, seed=9)
    s.sweep(10)
    sp = s.spins
    o1 = edwards_sokal_interface(sp, 2 * BC2, 2, np.random.default_rng(123))
    o2 = edwards_sokal_interface(sp, 2 * BC2, 2, np.random.default_rng(123))
    assert np.array_equal(o1.vert, o2.vert) and np.array_equal(o1.horiz, o2.horiz)


def _conditioned_law(W, H, bs, q, wall=None):
    g = Graph.box(0, W, 0, H)
    beta = dual_beta(bs, q)
    w = WeightProfile.uniform(g, beta, q)
    if wall is not None:
        jb = dual_beta(wall, q)
        ww = w.weights.copy()
        for k, (i, j) in enumerate(g.edges):
            if g.vertices[i][1] == 0 and g.vertices[j][1] == 0:
                ww[k] = math.expm1(jb)
        w = WeightProfile(q, ww)
    m = exact_measure(g, w)
    return g, m.condition(m.connection(g.index((0, 0)), g.index((W, 0))))


def test_es_law_2x2_short(rng):
    g, law = _conditioned_law(2, 2, 2 * BC2, 2)
    _, masks = es_box_chain(2, 2, 2 * BC2, 2, 200000, rng)
    emp = np.bincount(masks, minlength=law.probs.size) / len(masks)
    assert total_variation(emp, law.probs) < 0.03


def test_literal_parameter_fails_gate(rng):
    """The literal 1 - e^{-beta} reading does not reproduce the conditioned law."""
    g, law = _conditioned_law(2, 2, 2 * BC2, 2)
    _, masks = es_box_chain(2, 2, 2 * BC2, 2, 100000, rng, parameter="literal")
    emp = np.bincount(masks, minlength=law.probs.size) / len(masks)
    assert total_variation(emp, law.probs) > 0.5


def test_wall_coupling_law(rng):
    """A different coupling on the bottom dual row gives weight e^{J beta}-1 on the wall line."""
    bs, J = 2 * BC2, 1.7
    wall = wall_beta_star_for(dual_beta(bs, 2), 2, J)
    g, law = _conditioned_law(2, 2, bs, 2, wall=wall)
    _, masks = es_box_chain(2, 2, bs, 2, 300000, rng, wall_beta_star=wall)
    emp = np.bincount(masks, minlength=law.probs.size) / len(masks)
    assert total_variation(emp, law.probs) < 0.03


def test_spin_text_roundtrip():
    s = _sampler(W=5, H=3, q=3, bs=2 * critical_beta(3), seed=8)
    s.sweep(4)
    sp = s.spins
    back = SpinConfig.from_text(sp.to_text())
    assert np.array_equal(back.padded, sp.padded) and back.x0 == sp.x0
    assert sp.to_text().splitlines()[0] == "# 5 3 0"


def test_es_to_bond_config():
    s = _sampler(W=3, H=2, seed=5)
    s.sweep(5)
    out = s.es_output()
    g = Graph.box(0, 3, 0, 2)
    c = out.to_bond_config(g)
    assert c.open.sum() == out.vert.sum() + out.horiz.sum()
