"""Deterministic lattice oracles, independent of the Monte Carlo code.

The step law is discretized to cell masses on a grid of width ``h`` (cell
``i`` collects ``P(X in [(i - 1/2) h, (i + 1/2) h))``) and walks are
propagated by FFT convolution.  Killing is applied to the lattice points.
The discretization error is O(h).
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve


def kernel(law, h: float, hi: float):
    """First lattice index and cell masses of ``X`` up to ``hi`` (mass above is dropped)."""
    i0 = int(np.floor(law.lower / h + 0.5))
    i1 = int(np.ceil(hi / h))
    idx = np.arange(i0, i1 + 1)
    m = law.tail((idx - 0.5) * h) - law.tail((idx + 0.5) * h)
    m[0] = 1.0 - law.tail((i0 + 0.5) * h)
    return i0, m


class Lattice:
    """A sub-probability vector on ``h * (offset + arange(len(p)))``."""

    def __init__(self, law, h: float, hi: float):
        self.h = h
        self.k0, self.km = kernel(law, h, hi)
        self.p = np.array([1.0])
        self.off = 0

    @property
    def points(self) -> np.ndarray:
        return (self.off + np.arange(self.p.size)) * self.h

    def step(self, lo: float = -np.inf, hi: float = np.inf) -> None:
        """One convolution, then drop the mass outside ``[lo, hi]``."""
        q = np.maximum(fftconvolve(self.p, self.km), 0.0)
        off = self.off + self.k0
        s = (off + np.arange(q.size)) * self.h
        keep = (s >= lo - 1e-12) & (s <= hi + 1e-12)
        if not keep.any():
            self.p, self.off = np.zeros(1), 0
            return
        first = int(np.argmax(keep))
        last = q.size - int(np.argmax(keep[::-1]))
        self.p = np.where(keep[first:last], q[first:last], 0.0)
        self.off = off + first


def event_probability(law, n: int, x: float, T: float, h: float = 0.01) -> float:
    """``P(L_n >= -x, S_n <= T)``; paths above ``T + n * |lower|`` can never return and are dropped."""
    cap = T + n * abs(law.lower) + 1.0
    lat = Lattice(law, h, cap + x + 1.0)
    for _ in range(n):
        lat.step(-x, cap)
    return float(lat.p[lat.points <= T + 1e-12].sum())


def free_interval_probability(law, n: int, lo: float, hi: float, h: float = 0.01) -> float:
    """``P(S_n in [lo, hi))`` for the free walk (mass above ``hi + n |lower|`` dropped)."""
    cap = hi + n * abs(law.lower) + 1.0
    lat = Lattice(law, h, cap - n * law.lower + 1.0)
    for _ in range(n):
        lat.step(-np.inf, cap)
    s = lat.points
    # half-open interval on a lattice of midpoints: weight endpoint cells by half
    w = ((s > lo) & (s < hi)).astype(float) + 0.5 * (np.isclose(s, lo) + np.isclose(s, hi))
    return float(lat.p @ w)


def renewal_oracle(law, xs, zs, K: int = 1000, h: float = 0.05):
    """Truncated ``U(x)`` and ``V(-z)`` series."""
    xs, zs = np.asarray(xs, float), np.asarray(zs, float)
    V = np.ones(zs.size)
    lat = Lattice(law, h, 1500.0)
    for _ in range(K):
        lat.step(0.0, 1500.0)
        s = lat.points
        V += np.array([lat.p[s < z - 1e-12].sum() for z in zs])
    U = np.ones(xs.size)
    lat = Lattice(law, h, 10.0)
    for _ in range(K):
        lat.step(-600.0, -h / 2)
        s = lat.points
        U += np.array([lat.p[s >= -x - 1e-12].sum() for x in xs])
    return U, V
