"""The common cluster of v_L and v_R: envelopes, cone points, decomposition.

Clusters are stored as integer arrays so that N = 128 samples (tens of
thousands of vertices) stay cheap: ``vertices`` is (n, 2) sorted
lexicographically, ``edges`` is (m, 4) rows (x1, y1, x2, y2) with the first
endpoint the smaller one.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial import QhullError

from .lattice import Geometry
from .random_cluster import BondConfig


class NotConnectedError(ValueError):
    """v_L and v_R lie in different open clusters."""


# ---------------------------------------------------------------- extraction

@njit(cache=True)
def _grid_bfs(vert, horiz, i0, j0):
    W = horiz.shape[0]
    H = vert.shape[1]
    seen = np.zeros((W + 1, H + 1), dtype=np.bool_)
    stack = np.empty((W + 1) * (H + 1), dtype=np.int64)
    seen[i0, j0] = True
    stack[0] = i0 * (H + 1) + j0
    top = 1
    while top > 0:
        top -= 1
        i = stack[top] // (H + 1)
        j = stack[top] % (H + 1)
        if i < W and horiz[i, j] and not seen[i + 1, j]:
            seen[i + 1, j] = True
            stack[top] = (i + 1) * (H + 1) + j
            top += 1
        if i > 0 and horiz[i - 1, j] and not seen[i - 1, j]:
            seen[i - 1, j] = True
            stack[top] = (i - 1) * (H + 1) + j
            top += 1
        if j < H and vert[i, j] and not seen[i, j + 1]:
            seen[i, j + 1] = True
            stack[top] = i * (H + 1) + j + 1
            top += 1
        if j > 0 and vert[i, j - 1] and not seen[i, j - 1]:
            seen[i, j - 1] = True
            stack[top] = i * (H + 1) + j - 1
            top += 1
    return seen


def connected_arrays(out, u, v) -> bool:
    """u <-> v in the bond arrays of an ``ESOutput``."""
    seen = _grid_bfs(out.vert, out.horiz, u[0] - out.x0, u[1])
    return bool(seen[v[0] - out.x0, v[1]])


@dataclass
class Cluster:
    vertices: np.ndarray
    edges: np.ndarray
    N: int

    def __post_init__(self):
        self.vertices = _sort_rows(np.asarray(self.vertices, dtype=np.int64).reshape(-1, 2))
        self.edges = _sort_rows(np.asarray(self.edges, dtype=np.int64).reshape(-1, 4))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def vertex_set(self) -> set[tuple[int, int]]:
        return {tuple(int(c) for c in p) for p in self.vertices}

    def edge_set(self) -> set[tuple[int, int, int, int]]:
        return {tuple(int(c) for c in e) for e in self.edges}


def _sort_rows(a: np.ndarray) -> np.ndarray:
    if len(a) == 0:
        return a
    order = np.lexsort(a.T[::-1])
    return a[order]


def _from_es(out, geometry: Geometry) -> Cluster:
    u, v = geometry.v_left, geometry.v_right
    seen = _grid_bfs(out.vert, out.horiz, u[0] - out.x0, u[1])
    if not seen[v[0] - out.x0, v[1]]:
        raise NotConnectedError("v_L and v_R are not connected")
    ii, jj = np.nonzero(seen)
    verts = np.column_stack([ii + out.x0, jj])
    vi, vj = np.nonzero(out.vert & seen[:, :-1])
    hi, hj = np.nonzero(out.horiz & seen[:-1, :])
    edges = np.concatenate([
        np.column_stack([vi + out.x0, vj, vi + out.x0, vj + 1]),
        np.column_stack([hi + out.x0, hj, hi + out.x0 + 1, hj]),
    ])
    return Cluster(verts, edges, geometry.N)


def _from_bonds(omega: BondConfig, geometry: Geometry) -> Cluster:
    g = omega.graph
    adj: dict[int, list[tuple[int, int]]] = {}
    for k in np.flatnonzero(omega.open):
        a, b = g.edges[k]
        adj.setdefault(a, []).append((b, k))
        adj.setdefault(b, []).append((a, k))
    start, goal = g.index(geometry.v_left), g.index(geometry.v_right)
    seen = {start}
    used = set()
    queue = deque([start])
    while queue:
        a = queue.popleft()
        for b, k in adj.get(a, []):
            used.add(k)
            if b not in seen:
                seen.add(b)
                queue.append(b)
    if goal not in seen:
        raise NotConnectedError("v_L and v_R are not connected")
    verts = [g.vertices[i] for i in seen]
    edges = []
    for k in used:
        (x1, y1), (x2, y2) = g.labels[k].primal_endpoints()
        edges.append((x1, y1, x2, y2))
    return Cluster(np.array(verts), np.array(edges), geometry.N)


def extract_cluster(omega, geometry: Geometry) -> Cluster:
    """Open cluster of v_L; accepts a ``BondConfig`` or an ``ESOutput``."""
    if isinstance(omega, BondConfig):
        return _from_bonds(omega, geometry)
    return _from_es(omega, geometry)


# ---------------------------------------------------------------- envelopes

@dataclass
class Envelopes:
    N: int
    gamma_plus: np.ndarray   # index k + N for column k = -N..N
    gamma_minus: np.ndarray

    def index(self, t: float) -> int:
        """Column of t in [0, 1] under t -> -N + floor(2Nt), clamped at N."""
        return min(-self.N + math.floor(2 * self.N * t), self.N)

    def rescaled(self, t, side: str = "plus"):
        arr = self.gamma_plus if side == "plus" else self.gamma_minus
        t = np.asarray(t, dtype=float)
        k = np.minimum(-self.N + np.floor(2 * self.N * t).astype(np.int64), self.N)
        return arr[k + self.N] / math.sqrt(self.N)

    @property
    def sup_gap(self) -> float:
        return float((self.gamma_plus - self.gamma_minus).max() / math.sqrt(self.N))


def envelopes(cluster: Cluster) -> Envelopes:
    N = cluster.N
    x, y = cluster.vertices[:, 0], cluster.vertices[:, 1]
    inside = (x >= -N) & (x <= N)
    x, y = x[inside], y[inside]
    gp = np.full(2 * N + 1, np.iinfo(np.int64).min)
    gm = np.full(2 * N + 1, np.iinfo(np.int64).max)
    np.maximum.at(gp, x + N, y)
    np.minimum.at(gm, x + N, y)
    if np.any(gp == np.iinfo(np.int64).min):
        missing = int(np.flatnonzero(gp == np.iinfo(np.int64).min)[0]) - N
        raise RuntimeError(f"column {missing} of the cluster is empty")
    return Envelopes(N, gp, gm)


# ---------------------------------------------------------------- cone points

def _column_extremes(vertices: np.ndarray):
    xs = vertices[:, 0]
    lo = int(xs.min())
    n = int(xs.max()) - lo + 1
    top = np.full(n, np.iinfo(np.int64).min)
    bot = np.full(n, np.iinfo(np.int64).max)
    count = np.zeros(n, dtype=np.int64)
    np.maximum.at(top, xs - lo, vertices[:, 1])
    np.minimum.at(bot, xs - lo, vertices[:, 1])
    np.add.at(count, xs - lo, 1)
    return lo, top, bot, count


def cone_points(cluster: Cluster) -> list[tuple[int, int]]:
    """Vertices v with every cluster vertex in v + (forward cone U backward cone).

    For p right of v the cone condition reads p2 - p1 <= v2 - v1 and
    p2 + p1 >= v2 + v1, so column extremes with running max/min suffice;
    the mirror conditions hold on the left.  A cone point is alone in its
    column.
    """
    if cluster.n_vertices == 0:
        return []
    lo, top, bot, count = _column_extremes(cluster.vertices)
    n = len(top)
    k = np.arange(n) + lo
    big = np.iinfo(np.int64).max // 4
    empty = count == 0
    t = np.where(empty, -big, top)
    b = np.where(empty, big, bot)
    # right side: suffix over columns strictly greater
    r_max_minus = np.append(np.maximum.accumulate((t - k)[::-1])[::-1][1:], -big)
    r_min_plus = np.append(np.minimum.accumulate((b + k)[::-1])[::-1][1:], big)
    l_max_plus = np.insert(np.maximum.accumulate(t + k)[:-1], 0, -big)
    l_min_minus = np.insert(np.minimum.accumulate(b - k)[:-1], 0, big)
    y = top
    ok = ((count == 1)
          & (r_max_minus <= y - k) & (r_min_plus >= y + k)
          & (l_max_plus <= y + k) & (l_min_minus >= y - k))
    return [(int(x), int(yy)) for x, yy in zip(k[ok], y[ok])]


def cone_points_naive(cluster: Cluster) -> list[tuple[int, int]]:
    """Literal definition, quadratic; the reference for ``cone_points``."""
    V = cluster.vertices
    out = []
    for v in V:
        d = V - v
        if np.all(np.abs(d[:, 1]) <= np.abs(d[:, 0])):
            out.append((int(v[0]), int(v[1])))
    return sorted(out)


# ---------------------------------------------------------------- decomposition

@dataclass
class Piece:
    """Vertices and edges relative to the marked point ``anchor``."""

    kind: str                     # "left", "interior", "right", "whole"
    anchor: tuple[int, int]
    end: tuple[int, int]
    vertices: np.ndarray
    edges: np.ndarray

    @property
    def displacement(self) -> tuple[int, int]:
        return (self.end[0] - self.anchor[0], self.end[1] - self.anchor[1])

    def translated(self, origin) -> tuple[np.ndarray, np.ndarray]:
        o = np.asarray(origin, dtype=np.int64)
        return self.vertices + o, self.edges + np.concatenate([o, o])

    def diameter(self) -> float:
        return _diameter(self.vertices)


@dataclass
class Decomposition:
    cone_points: list[tuple[int, int]]
    left: Piece | None
    pieces: list[Piece]
    right: Piece | None
    degenerate: bool = False
    start: tuple[int, int] = (0, 0)

    def all_pieces(self) -> list[Piece]:
        return ([self.left] if self.left else []) + self.pieces + ([self.right] if self.right else [])

    def displacements(self) -> np.ndarray:
        return np.array([p.displacement for p in self.pieces], dtype=np.int64).reshape(-1, 2)

    def reconstruct(self) -> tuple[np.ndarray, np.ndarray]:
        """Concatenate the pieces starting from the marked point of the first one."""
        pos = np.asarray(self.start, dtype=np.int64)
        vs, es = [], []
        for p in self.all_pieces():
            v, e = p.translated(pos)
            vs.append(v)
            es.append(e)
            pos = pos + np.asarray(p.displacement)
        V = np.unique(np.concatenate(vs), axis=0)
        E = np.unique(np.concatenate(es), axis=0) if es else np.zeros((0, 4), dtype=np.int64)
        return V, E

    def to_text(self) -> str:
        """One line per piece: index kind theta zeta n_vertices n_edges."""
        lines = ["# index kind theta zeta n_vertices n_edges"]
        for i, p in enumerate(self.all_pieces()):
            th, ze = p.displacement
            lines.append(f"{i} {p.kind} {th} {ze} {len(p.vertices)} {len(p.edges)}")
        return "\n".join(lines) + "\n"


def _slab(cluster: Cluster, x_lo: int, x_hi: int, kind: str, anchor, end) -> Piece:
    V, E = cluster.vertices, cluster.edges
    vm = (V[:, 0] >= x_lo) & (V[:, 0] <= x_hi)
    # an edge belongs to the slab holding both endpoints; vertical edges in a
    # cone-point column cannot exist, so every edge lands in exactly one slab
    em = (E[:, 0] >= x_lo) & (E[:, 2] <= x_hi)
    a = np.asarray(anchor, dtype=np.int64)
    return Piece(kind, tuple(anchor), tuple(end), V[vm] - a, E[em] - np.concatenate([a, a]))


def irreducible_decomposition(cluster: Cluster, start=None, end=None) -> Decomposition:
    """Split at every cone point.

    ``start``/``end`` are the marked points of the boundary pieces
    (default: the leftmost and rightmost vertices on the wall row, i.e.
    v_L and v_R for a wall-to-wall cluster).
    """
    V = cluster.vertices
    if start is None:
        start = (-cluster.N, 0)
    if end is None:
        end = (cluster.N, 0)
    start, end = tuple(start), tuple(end)
    cps = cone_points(cluster)
    x_min, x_max = int(V[:, 0].min()), int(V[:, 0].max())
    if len(cps) < 2:
        whole = Piece("whole", start, end, V - np.asarray(start), cluster.edges - np.asarray(start * 2))
        return Decomposition(cps, None, [whole], None, degenerate=True, start=start)
    left = _slab(cluster, x_min, cps[0][0], "left", start, cps[0])
    right = _slab(cluster, cps[-1][0], x_max, "right", cps[-1], end)
    pieces = [_slab(cluster, a[0], b[0], "interior", a, b) for a, b in zip(cps[:-1], cps[1:])]
    return Decomposition(cps, left, pieces, right, start=start)


def in_diamond_piece(piece: Piece) -> bool:
    """piece subset of D(f, b), tested in the anchor frame."""
    d = piece.vertices
    th, ze = piece.displacement
    fwd = np.abs(d[:, 1]) <= d[:, 0]
    bwd = np.abs(d[:, 1] - ze) <= th - d[:, 0]
    return bool(np.all(fwd & bwd))


def is_irreducible(piece: Piece) -> bool:
    """No cone point of the piece other than its two ends."""
    c = Cluster(piece.vertices, piece.edges, 0)
    inner = [p for p in cone_points(c) if p != (0, 0) and p != piece.displacement]
    return not inner


# ---------------------------------------------------------------- statistics

def _diameter(points: np.ndarray) -> float:
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear: fall through to the full pairwise scan
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


@dataclass
class RegularityReport:
    cone_count: int
    cone_density: float
    max_gap: int
    hausdorff: float
    max_piece_diam: float
    touches_delta: bool
    sup_envelope_gap: float

    COLUMNS = ("cone_count", "cone_density", "max_gap", "hausdorff",
               "max_piece_diam", "touches_delta", "sup_envelope_gap")

    def row(self) -> list:
        return [int(self.touches_delta) if c == "touches_delta" else getattr(self, c) for c in self.COLUMNS]


def regularity_report(cluster: Cluster, geometry: Geometry, decomposition: Decomposition | None = None,
                      env: Envelopes | None = None) -> RegularityReport:
    dec = decomposition or irreducible_decomposition(cluster)
    env = env or envelopes(cluster)
    cps = np.array(dec.cone_points, dtype=np.int64).reshape(-1, 2)
    V = cluster.vertices
    if len(cps) >= 2:
        max_gap = int(np.diff(cps[:, 0]).max())
    else:
        max_gap = int(V[:, 0].max() - V[:, 0].min())
    if len(cps):
        haus = float(cKDTree(cps).query(V)[0].max())
    else:
        haus = math.inf
    d = geometry.delta
    touches = bool(np.any((V[:, 0] >= d.x0) & (V[:, 0] <= d.x1) & (V[:, 1] >= d.y0) & (V[:, 1] <= d.y1)))
    return RegularityReport(
        cone_count=len(cps),
        cone_density=len(cps) / (2 * geometry.N),
        max_gap=max_gap,
        hausdorff=haus,
        max_piece_diam=max(p.diameter() for p in dec.all_pieces()),
        touches_delta=touches,
        sup_envelope_gap=env.sup_gap,
    )


def step_law_from_displacements(X: np.ndarray, symmetrize: bool = True):
    """Empirical law of (theta, zeta) rows, optionally averaged with its zeta-mirror."""
    from .effective_walk import validate_step_law

    X = np.asarray(X, dtype=np.int64).reshape(-1, 2)
    if len(X) == 0:
        raise ValueError("no displacements")
    if symmetrize:
        X = np.concatenate([X, X * np.array([1, -1])])
    keys, counts = np.unique(X, axis=0, return_counts=True)
    law = validate_step_law({(int(t), int(z)): c / len(X) for (t, z), c in zip(keys, counts)})
    return law, law.chi


def empirical_step_law(decompositions, symmetrize: bool = True):
    """Law of interior-piece displacements over a batch, and chi_hat = Var zeta / E theta."""
    decompositions = list(decompositions)
    if not decompositions:
        raise ValueError("empty batch")
    X = [d.displacements() for d in decompositions if not d.degenerate]
    X = np.concatenate(X) if X else np.zeros((0, 2), dtype=np.int64)
    if len(X) == 0:
        raise ValueError("batch contains no interior pieces")
    return step_law_from_displacements(X, symmetrize)


# ---------------------------------------------------------------- batch plumbing

@dataclass
class StatAccumulator:
    """Count, sum and sum of squares per key; ``merge`` is commutative."""

    n: int = 0
    sums: dict = field(default_factory=dict)
    sq: dict = field(default_factory=dict)

    def add(self, row: dict) -> None:
        self.n += 1
        for k, v in row.items():
            self.sums[k] = self.sums.get(k, 0.0) + float(v)
            self.sq[k] = self.sq.get(k, 0.0) + float(v) ** 2

    def merge(self, other: "StatAccumulator") -> "StatAccumulator":
        out = StatAccumulator(self.n + other.n, dict(self.sums), dict(self.sq))
        for k in other.sums:
            out.sums[k] = out.sums.get(k, 0.0) + other.sums[k]
            out.sq[k] = out.sq.get(k, 0.0) + other.sq[k]
        return out

    def mean(self, k: str) -> float:
        return self.sums[k] / self.n

    def stderr(self, k: str) -> float:
        if self.n < 2:
            return math.inf
        m = self.mean(k)
        var = max(self.sq[k] / self.n - m * m, 0.0) * self.n / (self.n - 1)
        return math.sqrt(var / self.n)


def reports_csv(reports: list[RegularityReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sample",) + RegularityReport.COLUMNS)
    for i, r in enumerate(reports):
        w.writerow([i] + r.row())
    return buf.getvalue()


def envelopes_csv(envs: list[Envelopes]) -> str:
    """Columns: sample, N, gamma_plus (space separated, k=-N..N), gamma_minus."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sample", "N", "gamma_plus", "gamma_minus"))
    for i, e in enumerate(envs):
        w.writerow([i, e.N, " ".join(map(str, e.gamma_plus)), " ".join(map(str, e.gamma_minus))])
    return buf.getvalue()
