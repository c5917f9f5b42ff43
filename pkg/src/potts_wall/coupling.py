"""Sequential monotone coupling of two random-cluster measures on a small graph.

Edges are revealed in canonical order e_1, e_2, ...; a single uniform u_i
opens e_i in omega (weight b on the lower edges) when u_i is below its
conditional probability given omega's history, and in eta (weight a) when
below eta's conditional.  Everything is exact: conditionals come from
prefix-marginal tables of the full measures, and the joint law is obtained
by splitting [0, 1] at the two thresholds at every revealed edge.

Prefix encoding: a history of e_1..e_i is the integer with e_1 as the most
significant of i bits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

from .random_cluster import (FREE, BondConfig, ExactMeasure, Graph, WeightProfile,
                             exact_measure, pivotal_edges)

MAX_JOINT_EDGES = 14
TIE_TOL = 1e-12


class CouplingTooLarge(ValueError):
    pass


def _reverse_bits(E: int) -> np.ndarray:
    """perm[prefix] = edge-index mask of the same configuration."""
    m = np.arange(1 << E)
    out = np.zeros_like(m)
    for k in range(E):
        out |= ((m >> (E - 1 - k)) & 1) << k
    return out


@dataclass
class CouplingInstance:
    graph: Graph
    q: float
    a: float
    b: float
    lower: frozenset[int]
    upper_weight: float | None = None

    def __post_init__(self):
        if not 0 <= self.a < self.b:
            raise ValueError("need 0 <= a < b")
        if self.q < 1:
            raise ValueError("need q >= 1")
        self.lower = frozenset(int(k) for k in self.lower)
        if any(not 0 <= k < self.graph.n_edges for k in self.lower):
            raise ValueError("lower edge index out of range")

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    def weights(self, side: str) -> WeightProfile:
        up = self.b if self.upper_weight is None else self.upper_weight
        low = self.b if side == "b" else self.a
        w = np.array([low if k in self.lower else up for k in range(self.n_edges)], dtype=float)
        return WeightProfile(self.q, w)

    @cached_property
    def measures(self) -> dict[str, ExactMeasure]:
        return {s: exact_measure(self.graph, self.weights(s), FREE) for s in ("a", "b")}

    @cached_property
    def prefix_tables(self) -> dict[str, list[np.ndarray]]:
        """tables[s][i][prefix] = measure of the i-edge prefix."""
        perm = _reverse_bits(self.n_edges)
        out = {}
        for s, meas in self.measures.items():
            t = meas.probs[perm]
            levels = [t]
            while len(levels[-1]) > 1:
                x = levels[-1]
                levels.append(x[0::2] + x[1::2])
            out[s] = levels[::-1]
        return out

    @property
    def epsilon(self) -> float:
        return (self.b - self.a) / ((self.b + self.q) * self.b)

    @property
    def claim_bound(self) -> float:
        return (self.b - self.a) / ((self.b + self.q) * (self.b + 1))


def _threshold(levels: list[np.ndarray], i: int, prefix):
    """P(e_i open | prefix of e_1..e_{i-1}), i 1-based; vectorized in prefix."""
    num = levels[i][2 * prefix + 1]
    den = levels[i - 1][prefix]
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def conditional_open_prob(instance: CouplingInstance, side: str, history, i: int) -> float:
    if instance.n_edges > 22:
        raise CouplingTooLarge("graph exceeds the enumeration limit")
    if len(history) != i - 1:
        raise ValueError("history must cover e_1..e_{i-1}")
    prefix = 0
    for bit in history:
        prefix = 2 * prefix + int(bit)
    return float(_threshold(instance.prefix_tables[side], i, np.array([prefix]))[0])


def coupled_sample(instance: CouplingInstance, uniforms) -> tuple[BondConfig, BondConfig]:
    if len(uniforms) != instance.n_edges:
        raise ValueError("need one uniform per edge")
    tb, ta = instance.prefix_tables["b"], instance.prefix_tables["a"]
    xo = xe = 0
    for i, u in enumerate(uniforms, start=1):
        to = _threshold(tb, i, np.array([xo]))[0]
        te = _threshold(ta, i, np.array([xe]))[0]
        xo = 2 * xo + int(u < to)
        xe = 2 * xe + int(u < te)
    perm = _reverse_bits(instance.n_edges)
    g = instance.graph
    return BondConfig.from_mask(g, int(perm[xo])), BondConfig.from_mask(g, int(perm[xe]))


@dataclass
class JointLaw:
    """Leaves of the coupling tree: omega mask, eta mask (edge-index bits), mass."""

    omega: np.ndarray
    eta: np.ndarray
    mass: np.ndarray
    min_threshold_gap: float          # min over reachable nodes of t_omega - t_eta
    lower_gaps: list = field(default_factory=list)  # (gap, level i, omega prefix, eta prefix)

    def marginal(self, side: str, n_edges: int) -> np.ndarray:
        idx = self.omega if side == "b" else self.eta
        return np.bincount(idx, weights=self.mass, minlength=1 << n_edges)


def exact_joint_law(instance: CouplingInstance) -> JointLaw:
    E = instance.n_edges
    if E > MAX_JOINT_EDGES:
        raise CouplingTooLarge(f"{E} edges exceeds the joint-law limit of {MAX_JOINT_EDGES}")
    tb, ta = instance.prefix_tables["b"], instance.prefix_tables["a"]
    xo = np.zeros(1, dtype=np.int64)
    xe = np.zeros(1, dtype=np.int64)
    mass = np.ones(1)
    min_gap = math.inf
    lower_gaps = []
    for i in range(1, E + 1):
        to = _threshold(tb, i, xo)
        te = _threshold(ta, i, xe)
        gap = to - te
        min_gap = min(min_gap, float(gap.min()))
        if (i - 1) in instance.lower:
            j = int(np.argmin(gap))
            lower_gaps.append((float(gap[j]), i, int(xo[j]), int(xe[j])))
        # equal thresholds can differ by roundoff; do not let that open a phantom branch
        te = np.where((te > to) & (te - to < TIE_TOL), to, te)
        lo = np.minimum(to, te)
        children = [
            (2 * xo + 1, 2 * xe + 1, mass * lo),
            (2 * xo + 1, 2 * xe, mass * np.clip(to - te, 0, None)),
            (2 * xo, 2 * xe, mass * (1 - np.maximum(to, te))),
            # only reachable if the ordering t_omega >= t_eta fails
            (2 * xo, 2 * xe + 1, mass * np.clip(te - to, 0, None)),
        ]
        xo = np.concatenate([c[0] for c in children])
        xe = np.concatenate([c[1] for c in children])
        mass = np.concatenate([c[2] for c in children])
        keep = mass > 0
        xo, xe, mass = xo[keep], xe[keep], mass[keep]
    perm = _reverse_bits(E)
    return JointLaw(perm[xo], perm[xe], mass, min_gap, lower_gaps)


@dataclass
class BoundsReport:
    marginal_tv_b: float
    marginal_tv_a: float
    monotone_mass: float                  # mass on {omega >= eta}
    min_threshold_gap: float
    claim_bound: float
    claim_margin: float                   # min over lower edges of gap - bound
    claim_witness: tuple | None
    epsilon: float
    strict_margin: float                  # min over (psi, A) of (1-eps)^|A| Phi_b(psi) - Psi(...)
    strict_witness: tuple | None

    @property
    def ok(self) -> bool:
        tol = TIE_TOL
        return (self.marginal_tv_a < 1e-10 and self.marginal_tv_b < 1e-10
                and abs(self.monotone_mass - 1) < 1e-10 and self.min_threshold_gap >= -tol
                and self.claim_margin >= -tol and self.strict_margin >= -tol)

    def to_text(self) -> str:
        return "\n".join([
            f"marginal_tv_b {self.marginal_tv_b:.3e}",
            f"marginal_tv_a {self.marginal_tv_a:.3e}",
            f"monotone_mass {self.monotone_mass:.15f}",
            f"min_threshold_gap {self.min_threshold_gap:.6e}",
            f"claim_bound {self.claim_bound:.6e}",
            f"claim_margin {self.claim_margin:.6e} witness(level, omega_prefix, eta_prefix) {self.claim_witness}",
            f"epsilon {self.epsilon:.6e}",
            f"strict_margin {self.strict_margin:.6e} witness(psi_mask, A_mask) {self.strict_witness}",
            f"verdict {'pass' if self.ok else 'FAIL'}",
        ]) + "\n"


def _superset_sums(F: np.ndarray, k: int) -> np.ndarray:
    F = F.copy()
    for bit in range(k):
        step = 1 << bit
        idx = np.arange(F.shape[1])
        has = (idx & step) == 0
        F[:, has] += F[:, idx[has] | step]
    return F


def verify_bounds(instance: CouplingInstance, joint: JointLaw | None = None) -> BoundsReport:
    E = instance.n_edges
    joint = joint or exact_joint_law(instance)
    pb = instance.measures["b"].probs
    pa = instance.measures["a"].probs
    tv_b = 0.5 * float(np.abs(joint.marginal("b", E) - pb).sum())
    tv_a = 0.5 * float(np.abs(joint.marginal("a", E) - pa).sum())
    mono = float(joint.mass[(joint.omega & joint.eta) == joint.eta].sum())

    bound = instance.claim_bound
    if joint.lower_gaps:
        gap, i, xo, xe = min(joint.lower_gaps)
        claim_margin, claim_witness = gap - bound, (i, xo, xe)
    else:
        claim_margin, claim_witness = math.inf, None

    lower = sorted(instance.lower)
    L = len(lower)
    eps = instance.epsilon
    if L:
        # eta restricted to the lower edges, as an L-bit index
        el = np.zeros_like(joint.eta)
        for j, k in enumerate(lower):
            el |= ((joint.eta >> k) & 1) << j
        psis, row = np.unique(joint.omega, return_inverse=True)
        F = np.zeros((len(psis), 1 << L))
        np.add.at(F, (row, el), joint.mass)
        S = _superset_sums(F, L)
        sizes = np.array([bin(A).count("1") for A in range(1 << L)])
        rhs = (1 - eps) ** sizes[None, :] * pb[psis][:, None]
        margin = rhs - S
        r, c = np.unravel_index(int(np.argmin(margin)), margin.shape)
        strict_margin = float(margin[r, c])
        A_mask = sum(1 << lower[j] for j in range(L) if (c >> j) & 1)
        strict_witness = (int(psis[r]), int(A_mask))
    else:
        strict_margin, strict_witness = math.inf, None
    return BoundsReport(tv_b, tv_a, mono, joint.min_threshold_gap, bound, claim_margin,
                        claim_witness, eps, strict_margin, strict_witness)


# ---------------------------------------------------------------- desk checks

def wall_penalty_check(instance: CouplingInstance, u, v) -> tuple[float, float]:
    """Both sides of P_a(u <-> v) <= E_b[1{u <-> v} (1 - eps)^{#pivotal lower edges}].

    The right side uses the finite-graph measure with weight b everywhere;
    the infinite-volume comparison is a further monotone step not checked here.
    """
    g = instance.graph
    ma, mb = instance.measures["a"], instance.measures["b"]
    iu, iv = g.index(u), g.index(v)
    lhs = float(ma.probs[ma.connection(iu, iv)].sum())
    eps = instance.epsilon
    rhs = 0.0
    for mask in np.flatnonzero(mb.connection(iu, iv)):
        piv = pivotal_edges(BondConfig.from_mask(g, int(mask)), u, v)
        rhs += mb.probs[mask] * (1 - eps) ** len(piv & instance.lower)
    return lhs, rhs


def fkg_pair_check(measure: ExactMeasure) -> float:
    """min over edge pairs of P(e open, f open) - P(e open) P(f open)."""
    E = measure.graph.n_edges
    masks = np.arange(measure.probs.size)
    bits = [(masks >> k) & 1 == 1 for k in range(E)]
    marg = [measure.probs[b].sum() for b in bits]
    worst = math.inf
    for e, f in itertools.combinations(range(E), 2):
        worst = min(worst, measure.probs[bits[e] & bits[f]].sum() - marg[e] * marg[f])
    return float(worst)


# ---------------------------------------------------------------- graph battery

def connected_graphs(max_edges: int = 8) -> list[nx.Graph]:
    """All connected simple graphs with 1..max_edges edges, up to isomorphism.

    Grown edge by edge: deleting a cycle edge or a leaf edge keeps a graph
    connected, so each class with m + 1 edges arises from one with m edges by
    adding an edge or a pendant vertex.
    """
    level = [nx.path_graph(2)]
    out = list(level)
    for _ in range(max_edges - 1):
        found: dict[str, list[nx.Graph]] = {}
        for G in level:
            n = G.number_of_nodes()
            cands = [(x, y) for x, y in itertools.combinations(range(n), 2) if not G.has_edge(x, y)]
            cands += [(x, n) for x in range(n)]
            for x, y in cands:
                H = G.copy()
                H.add_edge(x, y)
                h = nx.weisfeiler_lehman_graph_hash(H)
                bucket = found.setdefault(h, [])
                if not any(nx.is_isomorphic(H, K) for K in bucket):
                    bucket.append(H)
        level = [G for h in sorted(found) for G in found[h]]
        out.extend(level)
    return out


def graph_from_nx(G: nx.Graph) -> Graph:
    return Graph.from_pairs(G.number_of_nodes(), sorted(tuple(sorted(e)) for e in G.edges()))
