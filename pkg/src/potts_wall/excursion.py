"""Brownian excursion reference samples and two-sample comparisons.

The main sampler rotates a Gaussian bridge at its minimum (Vervaat).  By the
cyclic lemma the rotated path has exactly the law of the same bridge
conditioned to stay positive, which ``sample_excursion_rejection`` samples
directly; the two are an oracle pair at any grid size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp


@dataclass
class ExcursionSample:
    values: np.ndarray   # e(j/m), j = 0..m

    @property
    def m(self) -> int:
        return len(self.values) - 1

    def at(self, t: float) -> float:
        return float(np.interp(t, np.linspace(0, 1, self.m + 1), self.values))


def _bridges(count: int, m: int, rng: np.random.Generator) -> np.ndarray:
    inc = rng.standard_normal((count, m)) / math.sqrt(m)
    w = np.zeros((count, m + 1))
    np.cumsum(inc, axis=1, out=w[:, 1:])
    return w - np.linspace(0, 1, m + 1) * w[:, -1:]


def _vervaat(b: np.ndarray) -> np.ndarray:
    m = b.shape[1] - 1
    tau = b[:, :m].argmin(axis=1)
    idx = (tau[:, None] + np.arange(m + 1)[None, :]) % m
    e = np.take_along_axis(b, idx, axis=1) - b[np.arange(len(b)), tau][:, None]
    e[:, 0] = e[:, -1] = 0.0
    return e


def sample_excursion(m: int, rng: np.random.Generator) -> ExcursionSample:
    if m < 2:
        raise ValueError("grid size must be >= 2")
    return ExcursionSample(_vervaat(_bridges(1, m, rng))[0])


def excursion_marginals(t, count: int, rng: np.random.Generator, m: int = 1024,
                        batch: int = 4096) -> np.ndarray:
    """Values e(t) for ``count`` Vervaat excursions, shape (count, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((count, t.size))
    done = 0
    while done < count:
        k = min(batch, count - done)
        e = _vervaat(_bridges(k, m, rng))
        for j, tj in enumerate(t):
            i = min(int(tj * m), m - 1)
            frac = tj * m - i
            out[done:done + k, j] = e[:, i] * (1 - frac) + e[:, i + 1] * frac
        done += k
    return out


def sample_excursion_rejection(t, count: int, rng: np.random.Generator, m: int = 64,
                               batch: int = 8192) -> np.ndarray:
    """Gaussian bridges kept only if strictly positive inside (acceptance 1/m)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cols = np.minimum((t * m).astype(int), m)
    if np.any(np.abs(cols - t * m) > 1e-9):
        raise ValueError("rejection sampler evaluates at grid points only")
    out = []
    have = 0
    while have < count:
        b = _bridges(batch, m, rng)
        ok = np.all(b[:, 1:m] > 0, axis=1)
        acc = b[ok][:, cols]
        out.append(acc)
        have += len(acc)
    return np.concatenate(out)[:count]


def ks_statistic(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    return float(ks_2samp(a, b).statistic)


def marginal_compare(empirical, chi: float, t: float, n_ref: int, rng: np.random.Generator,
                     m: int = 1024) -> float:
    """KS distance between ``empirical`` and sqrt(chi) e(t) reference draws."""
    if chi <= 0:
        raise ValueError("chi must be positive")
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    ref = math.sqrt(chi) * excursion_marginals([t], n_ref, rng, m)[:, 0]
    return ks_statistic(empirical, ref)


def excursion_csv(values: np.ndarray, t) -> str:
    t = np.atleast_1d(t)
    head = "sample," + ",".join(f"e({x:g})" for x in t)
    rows = [f"{i}," + ",".join(f"{v:.10g}" for v in row) for i, row in enumerate(values)]
    return "\n".join([head] + rows) + "\n"
