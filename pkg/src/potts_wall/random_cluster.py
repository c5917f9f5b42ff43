"""Random-cluster measures with per-edge weights on small graphs.

Edge configurations are indexed by bitmasks: bit ``i`` is edge ``i`` of the
graph's canonical order.  ``exact_measure`` enumerates all of them; the
heat-bath chain works on boolean arrays.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numba import njit

from .lattice import Edge, box_edges
from .rng import make_state, uniform

MAX_ENUM_EDGES = 22


class GraphTooLarge(ValueError):
    pass


def critical_beta(q: float) -> float:
    return math.log1p(math.sqrt(q))


def dual_beta(beta: float, q: float) -> float:
    """beta* solving (e^beta - 1)(e^beta* - 1) = q."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return math.log1p(q / math.expm1(beta))


@dataclass(frozen=True)
class Graph:
    """Finite simple graph; ``edges`` are index pairs into ``vertices``."""

    vertices: tuple
    edges: tuple[tuple[int, int], ...]
    labels: tuple[Edge, ...] | None = None
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})

    @classmethod
    def from_edges(cls, edges: Iterable[Edge]) -> "Graph":
        """Graph of primal lattice edges, in canonical (sorted) edge order."""
        edges = sorted(edges)
        verts = sorted({p for e in edges for p in e.primal_endpoints()})
        index = {v: i for i, v in enumerate(verts)}
        pairs = tuple((index[a], index[b]) for a, b in (e.primal_endpoints() for e in edges))
        return cls(tuple(verts), pairs, tuple(edges))

    @classmethod
    def box(cls, x0: int, x1: int, y0: int, y1: int) -> "Graph":
        return cls.from_edges(box_edges(x0, x1, y0, y1))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "Graph":
        pairs = tuple(sorted(tuple(sorted(p)) for p in pairs))
        return cls(tuple(range(n)), pairs)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self, v) -> int:
        return self._index[v]

    def edge_index(self, e: Edge) -> int:
        return self.labels.index(e)

    def endpoint_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        eu = np.array([a for a, _ in self.edges], dtype=np.int64)
        ev = np.array([b for _, b in self.edges], dtype=np.int64)
        return eu, ev

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """adj[v] = list of (neighbour, edge index)."""
        adj = [[] for _ in self.vertices]
        for k, (a, b) in enumerate(self.edges):
            adj[a].append((b, k))
            adj[b].append((a, k))
        return adj


@dataclass(frozen=True)
class WeightProfile:
    q: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.q < 1:
            raise ValueError("cluster weight q must be >= 1")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("edge weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, graph: Graph, beta: float, q: float) -> "WeightProfile":
        return cls(q, np.full(graph.n_edges, math.expm1(beta)))

    @classmethod
    def wall(cls, graph: Graph, beta: float, q: float, J: float = 1.0, J_prime: float = 0.0,
             a: float | None = None) -> "WeightProfile":
        """Weights e^{J beta}-1 on the line y=0, and e^{J' beta}-1 (or ``a``) below it.

        Every other edge gets e^beta - 1.
        """
        lower = math.expm1(J_prime * beta) if a is None else a
        w = []
        for (i, j) in graph.edges:
            yi, yj = graph.vertices[i][1], graph.vertices[j][1]
            if yi < 0 or yj < 0:
                w.append(lower)
            elif yi == 0 and yj == 0:
                w.append(math.expm1(J * beta))
            else:
                w.append(math.expm1(beta))
        return cls(q, np.array(w))


@dataclass(frozen=True)
class BoundaryWiring:
    """Disjoint blocks of vertex indices that count as already connected."""

    blocks: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        seen = set()
        for b in self.blocks:
            if seen & set(b):
                raise ValueError("wiring blocks must be disjoint")
            seen |= set(b)

    def roots(self, n: int) -> np.ndarray:
        """Initial union-find parent array with each block collapsed."""
        parent = np.arange(n, dtype=np.int64)
        for b in self.blocks:
            for v in b:
                parent[v] = b[0]
        return parent


FREE = BoundaryWiring()


@dataclass
class BondConfig:
    graph: Graph
    open: np.ndarray

    def __post_init__(self):
        self.open = np.asarray(self.open, dtype=bool)
        if self.open.shape != (self.graph.n_edges,):
            raise ValueError("configuration length does not match the edge set")

    @classmethod
    def from_mask(cls, graph: Graph, mask: int) -> "BondConfig":
        bits = (mask >> np.arange(graph.n_edges)) & 1
        return cls(graph, bits.astype(bool))

    def to_mask(self) -> int:
        return int(sum(1 << int(i) for i in np.flatnonzero(self.open)))

    def flipped(self, k: int) -> "BondConfig":
        o = self.open.copy()
        o[k] = not o[k]
        return BondConfig(self.graph, o)

    def to_bytes(self) -> bytes:
        """Bit-per-edge record, little-endian bit order within bytes."""
        return np.packbits(self.open, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, graph: Graph, data: bytes) -> "BondConfig":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
        return cls(graph, bits[: graph.n_edges].astype(bool))

    def edge_order_text(self) -> str:
        return "\n".join(_edge_text(self.graph, k) for k in range(self.graph.n_edges))

    def to_text(self) -> str:
        """One open edge per line: ``x1 y1 x2 y2`` (or vertex indices)."""
        return "\n".join(_edge_text(self.graph, k) for k in np.flatnonzero(self.open)) + "\n"

    @classmethod
    def from_text(cls, graph: Graph, text: str) -> "BondConfig":
        lookup = {_edge_text(graph, k): k for k in range(graph.n_edges)}
        o = np.zeros(graph.n_edges, dtype=bool)
        for line in text.splitlines():
            if line.strip():
                o[lookup[" ".join(line.split())]] = True
        return cls(graph, o)


def _edge_text(graph: Graph, k: int) -> str:
    a, b = graph.edges[k]
    va, vb = graph.vertices[a], graph.vertices[b]
    if isinstance(va, tuple):
        return f"{va[0]} {va[1]} {vb[0]} {vb[1]}"
    return f"{va} {vb}"


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _log_weights(n, eu, ev, logw, logq, roots, out):
    E = eu.shape[0]
    parent = np.empty(n, dtype=np.int64)
    for mask in range(out.shape[0]):
        for i in range(n):
            parent[i] = roots[i]
        comps = 0
        for i in range(n):
            if _find(parent, i) == i:
                comps += 1
        s = 0.0
        for k in range(E):
            if (mask >> k) & 1:
                s += logw[k]
                a = _find(parent, eu[k])
                b = _find(parent, ev[k])
                if a != b:
                    parent[a] = b
                    comps -= 1
        out[mask] = s + comps * logq


@njit(cache=True)
def _connection_masks(n, eu, ev, u, v, out):
    parent = np.empty(n, dtype=np.int64)
    for mask in range(out.shape[0]):
        for i in range(n):
            parent[i] = i
        for k in range(eu.shape[0]):
            if (mask >> k) & 1:
                a = _find(parent, eu[k])
                b = _find(parent, ev[k])
                if a != b:
                    parent[a] = b
        out[mask] = _find(parent, u) == _find(parent, v)


@njit(cache=True)
def _heat_bath_sweeps(n, eu, ev, w, q, roots, state, sweeps, rs, counts, record):
    E = eu.shape[0]
    parent = np.empty(n, dtype=np.int64)
    for _ in range(sweeps):
        for e in range(E):
            for i in range(n):
                parent[i] = roots[i]
            for k in range(E):
                if k != e and state[k]:
                    a = _find(parent, eu[k])
                    b = _find(parent, ev[k])
                    if a != b:
                        parent[a] = b
            if _find(parent, eu[e]) == _find(parent, ev[e]):
                p = w[e] / (w[e] + 1.0)
            else:
                p = w[e] / (w[e] + q)
            state[e] = uniform(rs) < p
        if record:
            m = 0
            for k in range(E):
                if state[k]:
                    m |= 1 << k
            counts[m] += 1


# ---------------------------------------------------------------- exact law

@dataclass
class ExactMeasure:
    """Full probability table over edge bitmasks."""

    graph: Graph
    probs: np.ndarray

    def edge_marginals(self) -> np.ndarray:
        masks = np.arange(self.probs.size)
        return np.array([self.probs[(masks >> k) & 1 == 1].sum() for k in range(self.graph.n_edges)])

    def prob(self, config: BondConfig) -> float:
        return float(self.probs[config.to_mask()])

    def connection(self, u: int, v: int) -> np.ndarray:
        """Boolean table: does mask connect vertex indices u and v."""
        eu, ev = self.graph.endpoint_arrays()
        out = np.zeros(self.probs.size, dtype=np.bool_)
        _connection_masks(self.graph.n_vertices, eu, ev, u, v, out)
        return out

    def condition(self, event: np.ndarray) -> "ExactMeasure":
        p = np.where(event, self.probs, 0.0)
        z = p.sum()
        if z <= 0:
            raise ValueError("conditioning on a null event")
        return ExactMeasure(self.graph, p / z)


def exact_measure(graph: Graph, w: WeightProfile, wiring: BoundaryWiring = FREE) -> ExactMeasure:
    """Weight of omega is prod_{open e} w_e * q^{clusters}, normalized."""
    E = graph.n_edges
    if E > MAX_ENUM_EDGES:
        raise GraphTooLarge(f"{E} edges exceeds the enumeration limit of {MAX_ENUM_EDGES}")
    if len(w.weights) != E:
        raise ValueError("weight profile does not match the graph")
    eu, ev = graph.endpoint_arrays()
    with np.errstate(divide="ignore"):
        logw = np.log(w.weights)
    out = np.empty(1 << E)
    _log_weights(graph.n_vertices, eu, ev, logw, math.log(w.q), wiring.roots(graph.n_vertices), out)
    out -= out[np.isfinite(out)].max()
    p = np.exp(out)
    return ExactMeasure(graph, p / p.sum())


def total_variation(p: np.ndarray, r: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(r)).sum())


# ---------------------------------------------------------------- connectivity

def _open_adjacency(config: BondConfig, skip: int = -1) -> list[list[tuple[int, int]]]:
    adj = [[] for _ in config.graph.vertices]
    for k in np.flatnonzero(config.open):
        if k == skip:
            continue
        a, b = config.graph.edges[k]
        adj[a].append((b, int(k)))
        adj[b].append((a, int(k)))
    return adj


def _component(adj, start: int) -> dict[int, int]:
    """BFS over ``adj``; returns vertex -> edge used to reach it (-1 at root)."""
    seen = {start: -1}
    dq = deque([start])
    while dq:
        x = dq.popleft()
        for y, k in adj[x]:
            if y not in seen:
                seen[y] = k
                dq.append(y)
    return seen


def connectivity(config: BondConfig, u, v) -> bool:
    g = config.graph
    iu, iv = g.index(u), g.index(v)
    return iv in _component(_open_adjacency(config), iu)


def heat_bath_step(config: BondConfig, k: int, w: WeightProfile, rng: np.random.Generator,
                   wiring: BoundaryWiring = FREE) -> BondConfig:
    """Resample edge ``k`` from its conditional law given all other edges."""
    g = config.graph
    a, b = g.edges[k]
    adj = _open_adjacency(config, skip=k)
    for block in wiring.blocks:
        for x, y in zip(block, block[1:]):
            adj[x].append((y, -1))
            adj[y].append((x, -1))
    joined = b in _component(adj, a)
    we = w.weights[k]
    p = we / (we + 1.0) if joined else we / (we + w.q)
    out = config.open.copy()
    out[k] = rng.random() < p
    return BondConfig(g, out)


@njit(cache=True)
def _pivotal_kernel(n, eu, ev, open_, u, v, out):
    """out[k] = 1 iff flipping edge k changes whether u and v are connected.

    Connected case: the bridges on one u-v path (iterative Tarjan from u).
    Otherwise: the closed edges joining the clusters of u and v.
    """
    E = eu.shape[0]
    for k in range(E):
        out[k] = False
    if u == v:
        return
    deg = np.zeros(n + 1, dtype=np.int64)
    for k in range(E):
        if open_[k]:
            deg[eu[k] + 1] += 1
            deg[ev[k] + 1] += 1
    for i in range(n):
        deg[i + 1] += deg[i]
    nbr = np.empty(deg[n], dtype=np.int64)
    via = np.empty(deg[n], dtype=np.int64)
    fill = deg[:n].copy()
    for k in range(E):
        if open_[k]:
            nbr[fill[eu[k]]] = ev[k]
            via[fill[eu[k]]] = k
            fill[eu[k]] += 1
            nbr[fill[ev[k]]] = eu[k]
            via[fill[ev[k]]] = k
            fill[ev[k]] += 1
    # DFS from u: discovery times, low links, tree edges
    disc = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    pedge = np.full(n, -1, dtype=np.int64)
    bridge = np.zeros(E, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    ptr = deg[:n].copy()
    t = 0
    disc[u] = low[u] = t
    t += 1
    stack[0] = u
    top = 1
    while top > 0:
        x = stack[top - 1]
        if ptr[x] < deg[x + 1]:
            y = nbr[ptr[x]]
            k = via[ptr[x]]
            ptr[x] += 1
            if k == pedge[x]:
                continue
            if disc[y] >= 0:
                low[x] = min(low[x], disc[y])
            else:
                disc[y] = low[y] = t
                t += 1
                pedge[y] = k
                stack[top] = y
                top += 1
        else:
            top -= 1
            if top > 0:
                p = stack[top - 1]
                low[p] = min(low[p], low[x])
                if low[x] > disc[p]:
                    bridge[pedge[x]] = True
    if disc[v] >= 0:
        x = v
        while x != u:
            k = pedge[x]
            if bridge[k]:
                out[k] = True
            x = eu[k] if ev[k] == x else ev[k]
        return
    # v's cluster by a second search
    inv = np.zeros(n, dtype=np.bool_)
    inv[v] = True
    stack[0] = v
    top = 1
    while top > 0:
        top -= 1
        x = stack[top]
        for j in range(deg[x], deg[x + 1]):
            y = nbr[j]
            if not inv[y]:
                inv[y] = True
                stack[top] = y
                top += 1
    for k in range(E):
        if not open_[k]:
            a, b = eu[k], ev[k]
            if (disc[a] >= 0 and inv[b]) or (disc[b] >= 0 and inv[a]):
                out[k] = True


def pivotal_edges(config: BondConfig, u, v) -> set[int]:
    """Indices of edges whose flip changes whether u and v are connected."""
    g = config.graph
    eu, ev = g.endpoint_arrays()
    out = np.zeros(g.n_edges, dtype=np.bool_)
    _pivotal_kernel(g.n_vertices, eu, ev, np.asarray(config.open, dtype=np.bool_), g.index(u), g.index(v), out)
    return {int(k) for k in np.flatnonzero(out)}


@njit(cache=True)
def _pivotal_table(n, eu, ev, pairs, out):
    E = eu.shape[0]
    open_ = np.zeros(E, dtype=np.bool_)
    row = np.zeros(E, dtype=np.bool_)
    for mask in range(out.shape[0]):
        for k in range(E):
            open_[k] = (mask >> k) & 1
        for j in range(pairs.shape[0]):
            _pivotal_kernel(n, eu, ev, open_, pairs[j, 0], pairs[j, 1], row)
            m = 0
            for k in range(E):
                if row[k]:
                    m |= 1 << k
            out[mask, j] = m


def pivotal_table(graph: Graph, pairs: np.ndarray) -> np.ndarray:
    """Pivotal-edge bitmask for every configuration mask and vertex-index pair."""
    if graph.n_edges > MAX_ENUM_EDGES:
        raise GraphTooLarge("too many edges to tabulate")
    eu, ev = graph.endpoint_arrays()
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.zeros((1 << graph.n_edges, len(pairs)), dtype=np.int64)
    _pivotal_table(graph.n_vertices, eu, ev, pairs, out)
    return out


# ---------------------------------------------------------------- MCMC

def run_chain(graph: Graph, w: WeightProfile, sweeps: int, rng: np.random.Generator,
              wiring: BoundaryWiring = FREE, record: bool = False,
              start: np.ndarray | None = None):
    """Systematic-scan heat bath from the all-closed state.

    Returns the final configuration, and with ``record`` also the visit
    counts over bitmasks (one entry per sweep).
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if record and graph.n_edges > MAX_ENUM_EDGES:
        raise GraphTooLarge("cannot record a histogram for this many edges")
    eu, ev = graph.endpoint_arrays()
    state = np.zeros(graph.n_edges, dtype=np.bool_) if start is None else np.array(start, dtype=np.bool_)
    counts = np.zeros(1 << graph.n_edges if record else 1, dtype=np.int64)
    _heat_bath_sweeps(graph.n_vertices, eu, ev, w.weights, float(w.q), wiring.roots(graph.n_vertices),
                      state, sweeps, make_state(rng), counts, record)
    final = BondConfig(graph, state)
    return (final, counts) if record else final


def sample_chain(graph: Graph, w: WeightProfile, wiring: BoundaryWiring, sweeps: int,
                 rng: np.random.Generator) -> BondConfig:
    return run_chain(graph, w, sweeps, rng, wiring)


# ---------------------------------------------------------------- desk checks

def bk_pivotal_check(graph: Graph, w: WeightProfile, x: int, y: int, k: int) -> tuple[float, float]:
    """Both sides of the pivotal-edge BK-type bound, by enumeration.

    Left: P(A_e(x,i), A_e(j,y), omega_e = 1, e pivotal for x<->y), where
    e = {i, j} is edge ``k`` and A_e(a,b) is an open a-b path avoiding e.
    Right: (w_e + 1) P(x <-> i) P(i <-> y).
    """
    meas = exact_measure(graph, w)
    i, j = graph.edges[k]
    lhs = 0.0
    for mask in np.flatnonzero(meas.probs > 0):
        mask = int(mask)
        if not (mask >> k) & 1:
            continue
        c = BondConfig.from_mask(graph, mask)
        off = c.flipped(k)
        adj = _open_adjacency(off)
        comp_x = _component(adj, x)
        comp_y = _component(adj, y)
        if i in comp_x and j in comp_y and y not in comp_x:
            lhs += meas.probs[mask]
    conn_xi = meas.probs[meas.connection(x, i)].sum()
    conn_iy = meas.probs[meas.connection(i, y)].sum()
    return float(lhs), float((w.weights[k] + 1.0) * conn_xi * conn_iy)
