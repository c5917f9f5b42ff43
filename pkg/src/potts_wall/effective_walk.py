"""Directed random walks with finite-support steps (theta, zeta), theta >= 1.

Everything here is exact dynamic programming over (horizontal coordinate,
height).  Height windows are cut with a Hoeffding bound on the running
maximum, so every returned probability carries a certified truncation
error (``tol`` by default, 0 when the window covers all reachable heights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .rng import make_state, uniform

DEFAULT_TOL = 1e-12
MAX_CELLS = 2 * 10**8


class StepLawError(ValueError):
    pass


class WindowOverflow(MemoryError):
    def __init__(self, required: int):
        super().__init__(f"DP table would need {required} cells (limit {MAX_CELLS})")
        self.required = required


# ---------------------------------------------------------------- step laws

@dataclass(frozen=True)
class StepLaw:
    theta: np.ndarray
    zeta: np.ndarray
    p: np.ndarray
    mean_theta: float = field(init=False)
    var_zeta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mean_theta", float(self.p @ self.theta))
        m = float(self.p @ self.zeta)
        object.__setattr__(self, "var_zeta", float(self.p @ (self.zeta - m) ** 2))

    @property
    def chi(self) -> float:
        return self.var_zeta / self.mean_theta

    @property
    def zeta_max(self) -> int:
        return int(np.abs(self.zeta).max())

    @property
    def theta_max(self) -> int:
        return int(self.theta.max())

    def zeta_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        z, inv = np.unique(self.zeta, return_inverse=True)
        return z, np.bincount(inv, weights=self.p)

    def to_list(self) -> list[list]:
        return [[int(t), int(z), float(p)] for t, z, p in zip(self.theta, self.zeta, self.p)]


def validate_step_law(raw, atol: float = 1e-12) -> StepLaw:
    """Build a law from ``{(theta, zeta): p}`` or an iterable of ``(theta, zeta, p)``.

    Weights are normalized; theta >= 1 and conditional symmetry of zeta given
    theta are enforced.
    """
    items = raw.items() if isinstance(raw, dict) else (((t, z), p) for t, z, p in raw)
    acc: dict[tuple[int, int], float] = {}
    for (t, z), p in items:
        if int(t) != t or int(z) != z:
            raise StepLawError("steps must be integer")
        if p < 0 or not math.isfinite(p):
            raise StepLawError(f"bad weight {p} for step {(t, z)}")
        if t < 1:
            raise StepLawError(f"theta must be >= 1, got {t}")
        if p > 0:
            acc[(int(t), int(z))] = acc.get((int(t), int(z)), 0.0) + float(p)
    total = sum(acc.values())
    if not acc or total <= 0:
        raise StepLawError("law has no mass")
    for (t, z), p in acc.items():
        if abs(p - acc.get((t, -z), 0.0)) > atol * total:
            raise StepLawError(f"conditional law of zeta given theta={t} is not symmetric at zeta={z}")
    keys = sorted(acc)
    return StepLaw(np.array([k[0] for k in keys], dtype=np.int64),
                   np.array([k[1] for k in keys], dtype=np.int64),
                   np.array([acc[k] / total for k in keys]))


UNIT_STEP = {(1, -1): 0.5, (1, 1): 0.5}
THREE_POINT = {(1, -1): 1 / 3, (1, 0): 1 / 3, (1, 1): 1 / 3}


def standard_laws() -> dict[str, StepLaw]:
    """Reference laws used by tests and experiments."""
    return {
        "unit": validate_step_law(UNIT_STEP),
        "three_point": validate_step_law(THREE_POINT),
        "five_uniform": validate_step_law({(1, z): 0.2 for z in range(-2, 3)}),
        "mixed_theta": validate_step_law({(1, -1): 0.25, (1, 1): 0.25, (2, 0): 0.2,
                                          (2, -2): 0.15, (2, 2): 0.15}),
        "lazy_long": validate_step_law({(1, 0): 0.5, (1, -1): 0.2, (1, 1): 0.2,
                                        (3, -3): 0.05, (3, 3): 0.05}),
    }


# ---------------------------------------------------------------- windows

@dataclass(frozen=True)
class Window:
    lo: int
    hi: int
    error: float

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1


def _rise_bound(law: StepLaw, n: int, tol: float) -> int:
    # Hoeffding-Azuma maximal inequality: P(max_{i<=n} Z_i - Z_0 >= a) <= exp(-a^2 / (2 n zmax^2))
    return math.ceil(law.zeta_max * math.sqrt(2 * n * math.log(1 / tol)))


def height_window(law: StepLaw, n: int, u: int, v: int, lo: int, tol: float) -> Window:
    full = max(u, v) + n * law.zeta_max
    cut = max(u, v) + _rise_bound(law, n, tol)
    if cut >= full:
        return Window(lo, full, 0.0)
    return Window(lo, cut, tol)


def _check_cells(n: int, w: Window) -> None:
    cells = (n + 1) * w.size
    if cells > MAX_CELLS:
        raise WindowOverflow(cells)


# ---------------------------------------------------------------- DP kernels

@njit(cache=True)
def _forward(n, lo, size, u, th, ze, p, delta):
    """f[t, z-lo]: weight of reaching (t, z); steps below 0 pick up ``delta``."""
    f = np.zeros((n + 1, size))
    f[0, u - lo] = 1.0
    for t in range(n):
        for i in range(size):
            m = f[t, i]
            if m == 0.0:
                continue
            for s in range(th.size):
                t2 = t + th[s]
                if t2 > n:
                    continue
                j = i + ze[s]
                if j < 0 or j >= size:
                    continue
                w = m * p[s]
                if j + lo < 0:
                    w *= delta
                f[t2, j] += w
    return f


@njit(cache=True)
def _backward(n, lo, size, v, th, ze, p):
    """g[t, z-lo] = P_{(t,z)}(visit (n, v) without leaving the window from below)."""
    g = np.zeros((n + 1, size))
    g[n, v - lo] = 1.0
    for t in range(n - 1, -1, -1):
        for i in range(size):
            acc = 0.0
            for s in range(th.size):
                t2 = t + th[s]
                if t2 > n:
                    continue
                j = i + ze[s]
                if j < 0 or j >= size:
                    continue
                acc += p[s] * g[t2, j]
            g[t, i] = acc
    return g


@dataclass(frozen=True)
class DPResult:
    value: float
    error_bound: float
    window: Window


def hit_prob_dp(law: StepLaw, n: int, u: int, v: int, floor_k: int = 0,
                tol: float = DEFAULT_TOL, detail: bool = False):
    """P_{(0,u)}(walk visits (n, v) before any height < -floor_k)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if floor_k < 0:
        raise ValueError("floor_k must be >= 0")
    if u < -floor_k or v < -floor_k:
        raise ValueError("start or target lies below the floor")
    w = height_window(law, n, u, v, -floor_k, tol)
    if v > w.hi:
        res = DPResult(0.0, 0.0, w)
    else:
        _check_cells(n, w)
        f = _forward(n, w.lo, w.size, u, law.theta, law.zeta, law.p, 1.0)
        res = DPResult(float(f[n, v - w.lo]), w.error, w)
    return res if detail else res.value


def soft_core_dp(law: StepLaw, n: int, u: int, v: int, delta: float,
                 tol: float = DEFAULT_TOL, detail: bool = False):
    """E_{(0,u)}[1{visit (n, v)} delta^{#visits to negative heights before it}]."""
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    if n < 1 or u < 0 or v < 0:
        raise ValueError("need n >= 1 and u, v >= 0")
    if delta == 0:
        return hit_prob_dp(law, n, u, v, 0, tol, detail)
    if delta < 1:
        # a path reaching depth m spent at least m / zmax steps below 0
        depth = math.ceil(law.zeta_max * math.log(tol) / math.log(delta))
    else:
        depth = _rise_bound(law, n, tol)
    depth = min(depth, n * law.zeta_max)
    w = height_window(law, n, u, v, -depth, tol)
    _check_cells(n, w)
    err = w.error + (tol if depth < n * law.zeta_max else 0.0)
    f = _forward(n, w.lo, w.size, u, law.theta, law.zeta, law.p, float(delta))
    res = DPResult(float(f[n, v - w.lo]) if v <= w.hi else 0.0, err, Window(w.lo, w.hi, err))
    return res if detail else res.value


# ---------------------------------------------------------------- harmonic functions

def _overshoot_solve(z: np.ndarray, pz: np.ndarray, L: int) -> np.ndarray:
    """g(x) = E_x[U_tau] on x = 1..L with flat far field g(L + j) = g(L)."""
    from scipy.linalg import solve_banded

    zmax = int(np.abs(z).max())
    A = np.zeros((2 * zmax + 1, L))
    b = np.zeros(L)
    # banded storage: A[zmax + i - j, j] = M[i, j]
    for x in range(1, L + 1):
        i = x - 1
        A[zmax, i] += 1.0
        for zz, pp in zip(z, pz):
            y = x + int(zz)
            if y <= 0:
                b[i] += pp * y
            else:
                j = min(y, L) - 1
                A[zmax + i - j, j] -= pp
    return solve_banded((zmax, zmax), A, b)


@dataclass(frozen=True)
class HarmonicResult:
    values: np.ndarray       # h(0..L), h(0) = 0
    horizon: int
    error_bound: float

    def __call__(self, x):
        return self.values[x]


def harmonic_table(law: StepLaw, x_max: int, side: str = "plus", tol: float = 1e-10,
                   horizon: int | None = None, max_horizon: int = 1 << 17) -> HarmonicResult:
    """h(x) = x - E_x[U_tau] for x = 0..x_max, tau the first time U <= 0.

    The overshoot equation is solved on [1, L] with a flat closure beyond L;
    the reported bound is the change when the horizon is doubled.
    """
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    z, pz = law.zeta_marginal()
    if side == "minus":
        z = -z
    if law.var_zeta == 0:
        raise StepLawError("degenerate law: zeta never moves, tau is infinite")
    L = horizon or max(64, 4 * x_max, 16 * law.zeta_max)
    g = _overshoot_solve(z, pz, L)
    while True:
        g2 = _overshoot_solve(z, pz, 2 * L)
        err = float(np.abs(g2[: x_max + law.zeta_max] - g[: x_max + law.zeta_max]).max())
        if err < tol or horizon is not None:
            break
        L *= 2
        g = g2
        if 2 * L > max_horizon:
            raise RuntimeError(f"horizon {L} insufficient: achieved bound {err:.3e} > {tol:.1e}")
    x = np.arange(2 * L + 1, dtype=float)
    h = x.copy()
    h[1:] -= g2
    return HarmonicResult(h, 2 * L, err)


def harmonic_h(law: StepLaw, x: int, side: str = "plus", tol: float = 1e-10) -> float:
    if x < 1:
        raise ValueError("x must be >= 1")
    return float(harmonic_table(law, x, side, tol).values[x])


def check_harmonicity(law: StepLaw, h, xs, side: str = "plus") -> float:
    """max_x |h(x) - E[h(x + zeta); x + zeta > 0]| with h indexable by integers."""
    z, pz = law.zeta_marginal()
    if side == "minus":
        z = -z
    worst = 0.0
    for x in xs:
        rhs = sum(pp * h[x + int(zz)] for zz, pp in zip(z, pz) if x + zz > 0)
        worst = max(worst, abs(h[x] - rhs))
    return float(worst)


def ladder_renewal_h(law: StepLaw, x: int) -> float:
    """Renewal function of strict ascending ladder heights, times their mean.

    Restricted to upward skip-free zeta (|zeta| <= 1), where the ladder
    height is 1 almost surely for a centred walk.
    """
    if law.zeta_max > 1:
        raise StepLawError("ladder cross-check only implemented for unit-step laws")
    if law.var_zeta == 0:
        raise StepLawError("degenerate law")
    # ladder height law: the walk cannot skip levels upward, so it is a point mass at 1
    ladder = {1: 1.0}
    mean_h = sum(k * p for k, p in ladder.items())
    u = np.zeros(x)
    u[0] = 1.0
    for k in range(1, x):
        u[k] = sum(p * u[k - j] for j, p in ladder.items() if j <= k)
    return float(mean_h * u.sum())


# ---------------------------------------------------------------- ratio scans

def tpf_ratio_scan(law: StepLaw, u: int, v: int, n_grid, tol: float = DEFAULT_TOL):
    """r(n) = P(visit (n,v) before height < 0) * n^{3/2} / (h+(u) h-(v)).

    Returns (rows, stabilized) where rows are (n, probability, ratio).
    """
    n_grid = list(n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be increasing")
    # h is evaluated with killing at <= 0; the walk here may sit at 0, so shift by one
    ht = harmonic_table(law, max(u, v) + 1)
    hu, hv = ht.values[u + 1], harmonic_table(law, v + 1, side="minus").values[v + 1]
    rows = []
    for n in n_grid:
        pr = hit_prob_dp(law, n, u, v, 0, tol)
        rows.append((n, pr, pr * n ** 1.5 / (hu * hv)))
    stable = len(rows) >= 2 and rows[-2][2] > 0 and abs(rows[-1][2] / rows[-2][2] - 1) < 0.10
    return rows, stable


# ---------------------------------------------------------------- conditioned bridges

@dataclass
class WalkPath:
    u: int
    steps: np.ndarray   # (m, 2) rows (theta, zeta)

    @property
    def positions(self) -> np.ndarray:
        pos = np.zeros((len(self.steps) + 1, 2), dtype=np.int64)
        pos[0, 1] = self.u
        pos[1:] = pos[0] + np.cumsum(self.steps, axis=0)
        return pos

    def to_text(self) -> str:
        lines = [f"# start 0 {self.u}", "# theta zeta"]
        lines += [f"{int(t)} {int(z)}" for t, z in self.steps]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WalkPath":
        lines = text.splitlines()
        u = int(lines[0].split()[-1])
        steps = [tuple(int(c) for c in ln.split()) for ln in lines if ln and not ln.startswith("#")]
        return cls(u, np.array(steps, dtype=np.int64).reshape(-1, 2))


@njit(cache=True)
def _draw_bridge(g, lo, n, u, th, ze, p, rs, out_steps):
    t = 0
    i = u - lo
    m = 0
    size = g.shape[1]
    while t < n:
        cur = g[t, i]
        r = uniform(rs) * cur
        acc = 0.0
        chosen = -1
        for s in range(th.size):
            t2 = t + th[s]
            j = i + ze[s]
            if t2 > n or j < 0 or j >= size:
                continue
            acc += p[s] * g[t2, j]
            chosen = s
            if r < acc:
                break
        t += th[chosen]
        i += ze[chosen]
        out_steps[m] = chosen
        m += 1
    return m


@njit(cache=True)
def _bridge_values(g, lo, n, u, th, ze, p, rs, count, times, out):
    """Linear-interpolated heights at horizontal positions ``times`` for ``count`` bridges."""
    steps = np.empty(n, dtype=np.int64)
    for b in range(count):
        m = _draw_bridge(g, lo, n, u, th, ze, p, rs, steps)
        t = 0
        z = u
        k = 0
        for a in range(m):
            t2 = t + th[steps[a]]
            z2 = z + ze[steps[a]]
            while k < times.size and times[k] <= t2:
                out[b, k] = z + (z2 - z) * (times[k] - t) / (t2 - t)
                k += 1
            t = t2
            z = z2
        while k < times.size:
            out[b, k] = z
            k += 1


class BridgeSampler:
    """Exact sampler of the walk from (0,u) conditioned to visit (n,v) before height < 0.

    Each step is drawn from the Doob transform p(s) g(next) / g(current)
    of the backward DP table g.
    """

    def __init__(self, law: StepLaw, n: int, u: int, v: int, tol: float = DEFAULT_TOL):
        if u < 0 or v < 0 or n < 1:
            raise ValueError("need n >= 1 and u, v >= 0")
        self.law, self.n, self.u, self.v = law, n, u, v
        self.window = height_window(law, n, u, v, 0, tol)
        if v > self.window.hi:
            raise ValueError("target unreachable: zero-probability conditioning")
        _check_cells(n, self.window)
        self.g = _backward(n, 0, self.window.size, v, law.theta, law.zeta, law.p)
        self.prob = float(self.g[0, u])
        if self.prob <= 0:
            raise ValueError("target unreachable: zero-probability conditioning")

    def sample(self, rng: np.random.Generator) -> WalkPath:
        idx = np.empty(self.n, dtype=np.int64)
        m = _draw_bridge(self.g, 0, self.n, self.u, self.law.theta, self.law.zeta, self.law.p,
                         make_state(rng), idx)
        steps = np.column_stack([self.law.theta[idx[:m]], self.law.zeta[idx[:m]]])
        return WalkPath(self.u, steps)

    def values_at(self, t, count: int, rng: np.random.Generator) -> np.ndarray:
        """Heights at horizontal fractions t in [0, 1], shape (count, len(t))."""
        times = np.atleast_1d(np.asarray(t, dtype=float)) * self.n
        order = np.argsort(times)
        out = np.empty((count, times.size))
        _bridge_values(self.g, 0, self.n, self.u, self.law.theta, self.law.zeta, self.law.p,
                       make_state(rng), count, times[order], out)
        res = np.empty_like(out)
        res[:, order] = out
        return res


def sample_conditioned_bridge(law: StepLaw, n: int, u: int, v: int, rng: np.random.Generator) -> WalkPath:
    return BridgeSampler(law, n, u, v).sample(rng)


@dataclass
class RescaledPath:
    knots_t: np.ndarray
    knots_z: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.knots_t, self.knots_z)


def rescale_path(path: WalkPath, n: int, chi: float) -> RescaledPath:
    """Linear interpolation through (T_i / n, Z_i / sqrt(chi n))."""
    if chi <= 0:
        raise ValueError("chi must be positive")
    pos = path.positions
    return RescaledPath(pos[:, 0] / n, pos[:, 1] / math.sqrt(chi * n))


# ---------------------------------------------------------------- curvature

def _log_G(law: StepLaw, r: float, h: float) -> tuple[float, float]:
    """log E[e^{-r theta + h zeta}] and its r-derivative."""
    a = -r * law.theta + h * law.zeta
    m = a.max()
    w = law.p * np.exp(a - m)
    s = w.sum()
    return m + math.log(s), -float(w @ law.theta) / s


def solve_r(law: StepLaw, h: float, xtol: float = 1e-15, max_iter: int = 200) -> float:
    """Root of G(r, h) = 1 by Newton steps kept inside a shrinking bracket."""
    lo, hi = 0.0, abs(h) * law.zeta_max + 1e-300
    f_lo, _ = _log_G(law, lo, h)
    f_hi, _ = _log_G(law, hi, h)
    if f_lo < 0 or f_hi > 0:
        raise RuntimeError(f"no sign change on [{lo}, {hi}]: log G = {f_lo:.3e}, {f_hi:.3e}")
    r = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, df = _log_G(law, r, h)
        if f > 0:
            lo = r
        else:
            hi = r
        step = f / df if df != 0 else 0.0
        nr = r - step
        if not lo < nr < hi:
            nr = 0.5 * (lo + hi)
        if abs(nr - r) <= xtol * max(1.0, abs(r)) or hi - lo <= xtol:
            return nr
        r = nr
    raise RuntimeError(f"Newton did not converge; bracket [{lo:.3e}, {hi:.3e}]")


def _five_point(law: StepLaw, h0: float) -> float:
    r = {k: solve_r(law, k * h0) for k in (-2, -1, 1, 2)}
    return (-r[2] + 16 * r[1] + 16 * r[-1] - r[-2]) / (12 * h0 * h0)


def wulff_curvature(law: StepLaw, h0: float = 1e-2) -> float:
    """r''(0) for the level curve G(r, h) = 1, by a 5-point stencil and one Richardson step."""
    d1 = _five_point(law, h0)
    d2 = _five_point(law, h0 / 2)
    return (16 * d2 - d1) / 15
