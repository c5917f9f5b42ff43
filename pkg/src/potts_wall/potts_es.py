"""Dobrushin-boundary Potts model on the dual half-box and the Edwards-Sokal map.

The dual box has ``W x H`` sites: column ``c`` (1..W) sits at
x = x0 + c - 1/2 and row ``r`` (1..H) at y = r - 1/2, so its faces are
exactly the primal box {x0..x0+W} x {0..H}.  Spins live in a padded array
of shape (W+2, H+2); the pad holds the frozen boundary colours: 1 along the
bottom (y = -1/2 < 0) and 2 on the sides and top (y > 0).

Primal bonds produced by the map are stored as two arrays:

* ``vert[i, j]``  - edge (x0+i, j)-(x0+i, j+1),   shape (W+1, H)
* ``horiz[i, j]`` - edge (x0+i, j)-(x0+i+1, j),   shape (W, H+1)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import Edge, Geometry
from .random_cluster import BondConfig, Graph, critical_beta, dual_beta
from .rng import make_state, uniform

BOTTOM, SIDE = 1, 2


class InternalConsistencyError(RuntimeError):
    """A sample violated a property that holds surely; indicates a bug."""


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _pad(W, H):
    s = np.zeros((W + 2, H + 2), dtype=np.int8)
    for c in range(1, W + 1):
        s[c, 0] = 1
        s[c, H + 1] = 2
    for r in range(1, H + 1):
        s[0, r] = 2
        s[W + 1, r] = 2
    return s


@njit(cache=True)
def _heat_bath_ising(s, boltz, n, rs):
    """q = 2 fast path: P(colour 1) tabulated by neighbour counts."""
    W = s.shape[0] - 2
    H = s.shape[1] - 2
    bulk_p = np.empty(5)
    for n1 in range(5):
        bulk_p[n1] = boltz[n1, 0] / (boltz[n1, 0] + boltz[4 - n1, 0])
    # bottom row: three bulk neighbours plus the wall-coupled pad below
    wall_p = np.empty((4, 3))
    for n1 in range(4):
        for b in (1, 2):
            a1 = boltz[n1, 1 if b == 1 else 0]
            a2 = boltz[3 - n1, 1 if b == 2 else 0]
            wall_p[n1, b] = a1 / (a1 + a2)
    for _ in range(n):
        for c in range(1, W + 1):
            n1 = (s[c - 1, 1] == 1) + (s[c + 1, 1] == 1) + (s[c, 2] == 1)
            s[c, 1] = 1 if uniform(rs) < wall_p[n1, s[c, 0]] else 2
            for r in range(2, H + 1):
                n1 = (s[c - 1, r] == 1) + (s[c + 1, r] == 1) + (s[c, r - 1] == 1) + (s[c, r + 1] == 1)
                s[c, r] = 1 if uniform(rs) < bulk_p[n1] else 2


@njit(cache=True)
def _heat_bath_sweeps(s, q, bulk, wall, n, rs):
    W = s.shape[0] - 2
    H = s.shape[1] - 2
    # boltz[nb, nw] = exp(bulk * nb + wall * nw): agreeing bulk / wall neighbours
    boltz = np.empty((5, 2))
    for nb in range(5):
        for nw in range(2):
            boltz[nb, nw] = math.exp(bulk * nb + wall * nw)
    if q == 2:
        _heat_bath_ising(s, boltz, n, rs)
        return
    nb = np.zeros(q + 1, dtype=np.int64)
    cum = np.empty(q + 1)
    for _ in range(n):
        for c in range(1, W + 1):
            for r in range(1, H + 1):
                for k in range(1, q + 1):
                    nb[k] = 0
                nb[s[c - 1, r]] += 1
                nb[s[c + 1, r]] += 1
                nb[s[c, r + 1]] += 1
                bottom = s[c, r - 1]
                if r > 1:
                    nb[bottom] += 1
                tot = 0.0
                for k in range(1, q + 1):
                    tot += boltz[nb[k], 1 if (r == 1 and k == bottom) else 0]
                    cum[k] = tot
                u = uniform(rs) * tot
                k = 1
                while k < q and cum[k] <= u:
                    k += 1
                s[c, r] = k


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union(parent, a, b):
    a = _find(parent, a)
    b = _find(parent, b)
    if a != b:
        # frozen roots (the last two ids) always win
        if a > b:
            parent[b] = a
        else:
            parent[a] = b


@njit(cache=True)
def _site_id(c, r, W, H, s):
    # interior -> 0..W*H-1 ; frozen boundary colour 1 -> W*H ; colour 2 -> W*H+1
    if 1 <= c <= W and 1 <= r <= H:
        return (c - 1) * H + (r - 1)
    return W * H + s[c, r] - 1


@njit(cache=True)
def _sw_sweeps(s, q, p_bulk, p_wall, n, rs):
    W = s.shape[0] - 2
    H = s.shape[1] - 2
    M = W * H
    parent = np.empty(M + 2, dtype=np.int64)
    newc = np.empty(M + 2, dtype=np.int8)
    for _ in range(n):
        for i in range(M + 2):
            parent[i] = i
        for c in range(1, W + 1):
            for r in range(1, H + 1):
                a = _site_id(c, r, W, H, s)
                # right and up neighbours, plus the left and bottom pads
                if s[c + 1, r] == s[c, r] and uniform(rs) < p_bulk:
                    _union(parent, a, _site_id(c + 1, r, W, H, s))
                if s[c, r + 1] == s[c, r] and uniform(rs) < p_bulk:
                    _union(parent, a, _site_id(c, r + 1, W, H, s))
                if c == 1 and s[0, r] == s[c, r] and uniform(rs) < p_bulk:
                    _union(parent, a, _site_id(0, r, W, H, s))
                if r == 1 and s[c, 0] == s[c, r] and uniform(rs) < p_wall:
                    _union(parent, a, _site_id(c, 0, W, H, s))
        newc[M] = 1
        newc[M + 1] = 2
        for i in range(M):
            newc[i] = 0
        for c in range(1, W + 1):
            for r in range(1, H + 1):
                root = _find(parent, (c - 1) * H + (r - 1))
                if root < M and newc[root] == 0:
                    newc[root] = 1 + int(uniform(rs) * q)
                s[c, r] = newc[root]


@njit(cache=True)
def _es_map(s, p_bulk, p_wall, rs, vert, horiz):
    """Primal bonds: open iff the crossing dual bond is closed."""
    W = s.shape[0] - 2
    H = s.shape[1] - 2
    # dual horizontal edges (c, r)-(c+1, r) cross primal vertical edge x0+c, heights r-1..r
    for c in range(0, W + 1):
        for r in range(1, H + 1):
            if s[c, r] != s[c + 1, r]:
                vert[c, r - 1] = True
            else:
                vert[c, r - 1] = not (uniform(rs) < p_bulk)
    # dual vertical edges (c, r)-(c, r+1) cross primal horizontal edge at height r
    for c in range(1, W + 1):
        for r in range(0, H + 1):
            p = p_wall if r == 0 else p_bulk
            if s[c, r] != s[c, r + 1]:
                horiz[c - 1, r] = True
            else:
                horiz[c - 1, r] = not (uniform(rs) < p)


@njit(cache=True)
def _es_chain(s, q, bulk, wall, p_bulk, p_wall, kind, sweeps_between, n_samples, rs, masks, vidx, hidx):
    """Sample ``n_samples`` ES bitmasks on a small box, sweeping in between."""
    W = s.shape[0] - 2
    H = s.shape[1] - 2
    vert = np.zeros((W + 1, H), dtype=np.bool_)
    horiz = np.zeros((W, H + 1), dtype=np.bool_)
    for t in range(n_samples):
        if kind != 1:
            _sw_sweeps(s, q, 1.0 - math.exp(-bulk), 1.0 - math.exp(-wall), sweeps_between, rs)
        if kind != 0:
            _heat_bath_sweeps(s, q, bulk, wall, sweeps_between, rs)
        _es_map(s, p_bulk, p_wall, rs, vert, horiz)
        m = 0
        for i in range(W + 1):
            for j in range(H):
                if vert[i, j]:
                    m |= 1 << vidx[i, j]
        for i in range(W):
            for j in range(H + 1):
                if horiz[i, j]:
                    m |= 1 << hidx[i, j]
        masks[t] = m


# ---------------------------------------------------------------- public API

SWEEP_KINDS = {"sw": 0, "glauber": 1, "mixed": 2}


@dataclass
class SpinConfig:
    """Interior colours (W x H, column-major by x) plus frozen Dobrushin pads."""

    padded: np.ndarray
    x0: int

    @property
    def colors(self) -> np.ndarray:
        return self.padded[1:-1, 1:-1]

    @property
    def width(self) -> int:
        return self.padded.shape[0] - 2

    @property
    def height(self) -> int:
        return self.padded.shape[1] - 2

    def boundary_ok(self) -> bool:
        return bool(np.array_equal(_boundary(self.padded), _boundary(_pad(self.width, self.height))))

    def to_text(self) -> str:
        """Row-major colour grid, top row first, after a ``# W H x0`` header."""
        rows = [f"# {self.width} {self.height} {self.x0}"]
        for r in range(self.height - 1, -1, -1):
            rows.append(" ".join(str(int(v)) for v in self.colors[:, r]))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SpinConfig":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        W, H, x0 = (int(t) for t in lines[0].lstrip("#").split())
        s = _pad(W, H)
        for k, ln in enumerate(lines[1:]):
            s[1:-1, H - k] = [int(t) for t in ln.split()]
        return cls(s, x0)


def _boundary(s: np.ndarray) -> np.ndarray:
    return np.concatenate([s[0, 1:-1], s[-1, 1:-1], s[1:-1, 0], s[1:-1, -1]])


@dataclass
class ESOutput:
    """Primal bonds on the box and their dual complement (open = True)."""

    vert: np.ndarray
    horiz: np.ndarray
    x0: int

    @property
    def vert_star(self) -> np.ndarray:
        return ~self.vert

    @property
    def horiz_star(self) -> np.ndarray:
        return ~self.horiz

    @property
    def width(self) -> int:
        return self.horiz.shape[0]

    @property
    def height(self) -> int:
        return self.vert.shape[1]

    def primal_edges(self) -> list[Edge]:
        out = []
        for i, j in zip(*np.nonzero(self.vert)):
            out.append(Edge.primal((self.x0 + i, j), (self.x0 + i, j + 1)))
        for i, j in zip(*np.nonzero(self.horiz)):
            out.append(Edge.primal((self.x0 + i, j), (self.x0 + i + 1, j)))
        return sorted(out)

    def to_bond_config(self, graph: Graph) -> BondConfig:
        o = np.zeros(graph.n_edges, dtype=bool)
        index = {e: k for k, e in enumerate(graph.labels)}
        for e in self.primal_edges():
            o[index[e]] = True
        return BondConfig(graph, o)


class PottsSampler:
    """Markov chain for the Dobrushin Potts measure on a W x H dual box.

    ``wall_beta_star`` is the coupling across the bottom row (defaults to
    ``beta_star``); ``kind`` picks Swendsen-Wang, single-site heat bath, or
    one of each per sweep.
    """

    def __init__(self, width: int, height: int, beta_star: float, q: int, rng: np.random.Generator,
                 x0: int | None = None, wall_beta_star: float | None = None, kind: str = "sw"):
        if int(q) != q or q < 2:
            raise ValueError("Potts sampling needs an integer q >= 2")
        if beta_star < 0:
            raise ValueError("beta_star must be nonnegative")
        if kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep kind {kind!r}")
        if beta_star <= critical_beta(q):
            warnings.warn(f"beta_star={beta_star:.4f} is not above the critical value "
                          f"{critical_beta(q):.4f}", stacklevel=2)
        self.q = int(q)
        self.beta_star = float(beta_star)
        self.wall_beta_star = float(beta_star if wall_beta_star is None else wall_beta_star)
        self.kind = kind
        self.x0 = -(width // 2) if x0 is None else x0
        self.padded = _pad(width, height)
        # ground state of the Dobrushin condition: everything takes the bulk colour 2
        self.padded[1:-1, 1:-1] = SIDE
        self._rs = make_state(rng)

    @classmethod
    def for_geometry(cls, geometry: Geometry, beta_star: float, q: int, rng, **kw) -> "PottsSampler":
        return cls(2 * geometry.N, geometry.N, beta_star, q, rng, x0=-geometry.N, **kw)

    @property
    def spins(self) -> SpinConfig:
        return SpinConfig(self.padded.copy(), self.x0)

    def sweep(self, n: int = 1, kind: str | None = None) -> None:
        kind = kind or self.kind
        if kind in ("sw", "mixed"):
            _sw_sweeps(self.padded, self.q, -math.expm1(-self.beta_star),
                       -math.expm1(-self.wall_beta_star), n, self._rs)
        if kind in ("glauber", "mixed"):
            _heat_bath_sweeps(self.padded, self.q, self.beta_star, self.wall_beta_star, n, self._rs)

    def site_conditional(self, c: int, r: int) -> np.ndarray:
        """Heat-bath law of the colour at interior site (c, r), 1-based."""
        s = self.padded
        w = np.zeros(self.q + 1)
        w[s[c - 1, r]] += self.beta_star
        w[s[c + 1, r]] += self.beta_star
        w[s[c, r + 1]] += self.beta_star
        w[s[c, r - 1]] += self.wall_beta_star if r == 1 else self.beta_star
        p = np.exp(w[1:])
        return p / p.sum()

    def es_output(self, p_bulk: float | None = None, p_wall: float | None = None) -> ESOutput:
        W, H = self.padded.shape[0] - 2, self.padded.shape[1] - 2
        vert = np.zeros((W + 1, H), dtype=np.bool_)
        horiz = np.zeros((W, H + 1), dtype=np.bool_)
        pb = -math.expm1(-self.beta_star) if p_bulk is None else p_bulk
        pw = -math.expm1(-self.wall_beta_star) if p_wall is None else p_wall
        _es_map(self.padded, pb, pw, self._rs, vert, horiz)
        return ESOutput(vert, horiz, self.x0)


def es_bernoulli(beta_star: float, q: float, parameter: str = "dual") -> float:
    """Opening probability of the non-frozen dual bonds.

    ``"dual"`` uses 1 - e^{-beta*}, the choice that makes the primal law
    exact; ``"literal"`` uses 1 - e^{-beta} with beta the primal dual of beta*.
    """
    if parameter == "dual":
        return -math.expm1(-beta_star)
    if parameter == "literal":
        return -math.expm1(-dual_beta(beta_star, q))
    raise ValueError(f"unknown ES parameter convention {parameter!r}")


def sample_potts_dobrushin(geometry: Geometry, beta_star: float, q: int, sweeps: int,
                           rng: np.random.Generator, kind: str = "sw") -> SpinConfig:
    sampler = PottsSampler.for_geometry(geometry, beta_star, q, rng, kind=kind)
    sampler.sweep(sweeps)
    return sampler.spins


def edwards_sokal_interface(sigma: SpinConfig, beta_star: float, q: int, rng: np.random.Generator,
                            parameter: str = "dual", wall_beta_star: float | None = None) -> ESOutput:
    if not sigma.boundary_ok():
        raise ValueError("spin configuration does not carry the Dobrushin boundary")
    p = es_bernoulli(beta_star, q, parameter)
    pw = p if wall_beta_star is None else es_bernoulli(wall_beta_star, q, parameter)
    W, H = sigma.width, sigma.height
    vert = np.zeros((W + 1, H), dtype=np.bool_)
    horiz = np.zeros((W, H + 1), dtype=np.bool_)
    _es_map(sigma.padded, p, pw, make_state(rng), vert, horiz)
    return ESOutput(vert, horiz, sigma.x0)


def peierls_contained(sigma: SpinConfig, out: ESOutput) -> bool:
    """Every dual pair with different colours has its primal edge open."""
    s = sigma.padded
    dv = s[:-1, 1:-1] != s[1:, 1:-1]
    dh = s[1:-1, :-1] != s[1:-1, 1:]
    return bool(np.all(out.vert[dv]) and np.all(out.horiz[dh]))


def wall_beta_star_for(beta: float, q: float, J: float) -> float:
    """Dual coupling across the wall row reproducing primal weight e^{J beta}-1 on y=0."""
    return dual_beta(J * beta, q)


def sample_interface_cluster(geometry: Geometry, beta_star: float, q: int, sweeps: int,
                             rng: np.random.Generator, kind: str = "sw") -> ESOutput:
    """Primal bonds distributed as the conditioned half-box RC measure (after mixing)."""
    from .cluster_geometry import connected_arrays

    sampler = PottsSampler.for_geometry(geometry, beta_star, q, rng, kind=kind)
    sampler.sweep(sweeps)
    out = sampler.es_output()
    if not connected_arrays(out, geometry.v_left, geometry.v_right):
        raise InternalConsistencyError("v_L and v_R are not connected in the ES output")
    return out


def es_box_chain(width: int, height: int, beta_star: float, q: int, n_samples: int,
                 rng: np.random.Generator, kind: str = "mixed", sweeps_between: int = 1,
                 parameter: str = "dual", wall_beta_star: float | None = None) -> tuple[Graph, np.ndarray]:
    """Bitmasks (canonical edge order of the box graph) of successive ES samples.

    Used for exact-law comparisons on boxes small enough to enumerate.
    """
    graph = Graph.box(0, width, 0, height)
    index = {e: k for k, e in enumerate(graph.labels)}
    vidx = np.array([[index[Edge.primal((i, j), (i, j + 1))] for j in range(height)]
                     for i in range(width + 1)], dtype=np.int64)
    hidx = np.array([[index[Edge.primal((i, j), (i + 1, j))] for j in range(height + 1)]
                     for i in range(width)], dtype=np.int64)
    wb = beta_star if wall_beta_star is None else wall_beta_star
    s = _pad(width, height)
    s[1:-1, 1:-1] = SIDE
    masks = np.zeros(n_samples, dtype=np.int64)
    _es_chain(s, int(q), beta_star, wb, es_bernoulli(beta_star, q, parameter),
              es_bernoulli(wb, q, parameter), SWEEP_KINDS[kind], sweeps_between, n_samples,
              make_state(rng), masks, vidx, hidx)
    return graph, masks
