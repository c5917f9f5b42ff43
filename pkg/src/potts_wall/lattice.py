"""Integer-lattice geometry shared by every other module.

Points of Z^2 and of its dual (Z^2 + (1/2, 1/2)) are stored with doubled
coordinates: even entries are primal, odd entries are dual.  All predicates
below are exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple

Vertex = tuple[int, int]


class ConfigurationError(ValueError):
    """Raised when user-supplied model parameters are out of range."""


def double(p: Vertex) -> Vertex:
    return (2 * p[0], 2 * p[1])


class Edge(NamedTuple):
    """Unordered nearest-neighbour pair, in doubled coordinates, endpoints sorted."""

    a: Vertex
    b: Vertex

    @classmethod
    def from_doubled(cls, p: Vertex, q: Vertex) -> "Edge":
        if abs(p[0] - q[0]) + abs(p[1] - q[1]) != 2 or (p[0] - q[0]) * (p[1] - q[1]) != 0:
            raise ValueError(f"{p} and {q} are not neighbours")
        if p[0] % 2 != q[0] % 2 or p[1] % 2 != q[1] % 2:
            raise ValueError("mixed primal/dual endpoints")
        return cls(*sorted((p, q)))

    @classmethod
    def primal(cls, p: Vertex, q: Vertex) -> "Edge":
        return cls.from_doubled(double(p), double(q))

    @property
    def is_primal(self) -> bool:
        return self.a[0] % 2 == 0 and self.a[1] % 2 == 0

    @property
    def is_horizontal(self) -> bool:
        return self.a[1] == self.b[1]

    def endpoints(self) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
        """Real coordinates of the endpoints (halves for dual edges)."""
        return tuple((Fraction(x, 2), Fraction(y, 2)) for x, y in (self.a, self.b))

    def primal_endpoints(self) -> tuple[Vertex, Vertex]:
        if not self.is_primal:
            raise ValueError("dual edge has no integer endpoints")
        return (self.a[0] // 2, self.a[1] // 2), (self.b[0] // 2, self.b[1] // 2)


def dual_edge(e: Edge) -> Edge:
    """The unique edge of the other lattice crossing ``e`` at its midpoint."""
    mx, my = (e.a[0] + e.b[0]) // 2, (e.a[1] + e.b[1]) // 2
    # half of the direction vector, rotated by 90 degrees
    dx, dy = (e.b[0] - e.a[0]) // 2, (e.b[1] - e.a[1]) // 2
    return Edge.from_doubled((mx - dy, my + dx), (mx + dy, my - dx))


def box_vertices(x0: int, x1: int, y0: int, y1: int) -> list[Vertex]:
    return [(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)]


def box_edges(x0: int, x1: int, y0: int, y1: int) -> list[Edge]:
    """Primal edges of the box {x0..x1} x {y0..y1}, canonically sorted."""
    edges = []
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            if x < x1:
                edges.append(Edge.primal((x, y), (x + 1, y)))
            if y < y1:
                edges.append(Edge.primal((x, y), (x, y + 1)))
    return sorted(edges)


@dataclass(frozen=True)
class Cone:
    """Forward cone {p : d*(p-apex)_1 >= |(p-apex)_2|} or its mirror image."""

    apex: Vertex
    forward: bool = True
    aperture: Fraction = Fraction(1)


def cone_contains(cone: Cone, p: Vertex) -> bool:
    d1 = p[0] - cone.apex[0]
    d2 = p[1] - cone.apex[1]
    if not cone.forward:
        d1 = -d1
    ap = Fraction(cone.aperture)
    return ap.numerator * d1 >= ap.denominator * abs(d2)


def in_double_cone(apex: Vertex, p: Vertex) -> bool:
    """p in apex + (forward cone U backward cone), aperture 1."""
    return abs(p[1] - apex[1]) <= abs(p[0] - apex[0])


def in_diamond(u: Vertex, v: Vertex, p: Vertex) -> bool:
    return cone_contains(Cone(u, True), p) and cone_contains(Cone(v, False), p)


@dataclass(frozen=True)
class Rect:
    """Closed integer rectangle [x0, x1] x [y0, y1]."""

    x0: int
    x1: int
    y0: int
    y1: int

    @property
    def empty(self) -> bool:
        return self.x0 > self.x1 or self.y0 > self.y1

    def contains(self, p: Vertex) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def issubset(self, other: "Rect") -> bool:
        return (other.x0 <= self.x0 and self.x1 <= other.x1
                and other.y0 <= self.y0 and self.y1 <= other.y1)


@dataclass(frozen=True)
class Geometry:
    """The half-box Lambda_+ = {-N..N} x {0..N} and the repulsion rectangles.

    ``delta`` is [-N + 2N^{8 eps}, N - 2N^{8 eps}] x [0, N^eps] and
    ``delta_tilde`` is [-N + N^{8 eps}, N - N^{8 eps}] x [0, 2 N^eps], with
    each real power floored.
    """

    N: int
    eps: float
    delta: Rect = field(init=False)
    delta_tilde: Rect = field(init=False)

    def __post_init__(self):
        N, eps = self.N, self.eps
        s = N ** (8 * eps)
        h = N ** eps
        object.__setattr__(self, "delta", Rect(-N + math.floor(2 * s), N - math.floor(2 * s), 0, math.floor(h)))
        object.__setattr__(self, "delta_tilde", Rect(-N + math.floor(s), N - math.floor(s), 0, math.floor(2 * h)))

    @property
    def v_left(self) -> Vertex:
        return (-self.N, 0)

    @property
    def v_right(self) -> Vertex:
        return (self.N, 0)

    @property
    def upper_box(self) -> Rect:
        return Rect(-self.N, self.N, 0, self.N)

    @property
    def lower_box(self) -> Rect:
        return Rect(-self.N, self.N, -self.N, -1)

    @property
    def full_box(self) -> Rect:
        return Rect(-self.N, self.N, -self.N, self.N)

    @property
    def n_upper_vertices(self) -> int:
        return (2 * self.N + 1) * (self.N + 1)

    def upper_vertices(self) -> Iterator[Vertex]:
        yield from box_vertices(-self.N, self.N, 0, self.N)

    def upper_edges(self) -> list[Edge]:
        return box_edges(-self.N, self.N, 0, self.N)

    def full_edges(self) -> list[Edge]:
        return box_edges(-self.N, self.N, -self.N, self.N)

    def dual_upper_vertices(self) -> list[Vertex]:
        """Dual vertices of the upper box, doubled coordinates.

        These are the faces of Lambda_+: x in {-N+1/2..N-1/2}, y in {1/2..N-1/2}.
        """
        return [(2 * x + 1, 2 * y + 1) for x in range(-self.N, self.N) for y in range(0, self.N)]

    def describe(self) -> dict:
        d, t = self.delta, self.delta_tilde
        return {
            "N": self.N,
            "eps": self.eps,
            "delta": [d.x0, d.x1, d.y0, d.y1],
            "delta_tilde": [t.x0, t.x1, t.y0, t.y1],
            "v_left": list(self.v_left),
            "v_right": list(self.v_right),
        }


def build_geometry(N: int, eps: float) -> Geometry:
    if not isinstance(N, int) or N < 4:
        raise ConfigurationError(f"N must be an integer >= 4, got {N!r}")
    if not 0 < eps < 1 / 8:
        raise ConfigurationError(f"eps must lie in (0, 1/8), got {eps!r}")
    if N ** (8 * eps) >= N / 4:
        raise ConfigurationError(f"N^(8 eps) = {N ** (8 * eps):.3f} must be < N/4 = {N / 4}")
    g = Geometry(N, eps)
    if g.delta.empty:
        raise ConfigurationError(f"repulsion rectangle is empty for N={N}, eps={eps}")
    return g
