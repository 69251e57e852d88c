"""Heavy-tailed step laws with negative drift.

The built-in family is a shifted Pareto law

    X = scale * U**(-1/beta) - shift,   U ~ Uniform(0, 1],

with ``shift`` chosen so that ``E[X] = -a``.  Its survival function is
``((x + shift) / scale) ** -beta`` on the support ``[scale - shift, inf)``,
so the slowly varying factor is asymptotically constant and the local tail
condition holds with an explicit remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepLaw:
    """Shifted Pareto step distribution with mean ``-a`` and tail index ``beta``."""

    beta: float
    scale: float
    a: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta <= 2:
            raise ValueError(f"beta must be > 2 for finite variance, got beta={self.beta!r}")
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"scale must be > 0, got scale={self.scale!r}")
        if not np.isfinite(self.a) or self.a <= 0:
            raise ValueError(f"drift magnitude a must be > 0, got a={self.a!r}")

    @property
    def shift(self) -> float:
        return self.beta * self.scale / (self.beta - 1) + self.a

    @property
    def sigma2(self) -> float:
        b = self.beta
        return self.scale**2 * b / ((b - 1) ** 2 * (b - 2))

    @property
    def mean(self) -> float:
        return self.beta * self.scale / (self.beta - 1) - self.shift

    @property
    def lower(self) -> float:
        """Left endpoint of the support."""
        return self.scale - self.shift

    def tail(self, x):
        """``P(X > x)``."""
        x = np.asarray(x, dtype=float)
        z = np.maximum(x + self.shift, self.scale)
        out = np.where(x <= self.lower, 1.0, (z / self.scale) ** (-self.beta))
        return out if out.ndim else float(out)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x + self.shift
        inside = z >= self.scale
        zs = np.where(inside, z, self.scale)
        out = np.where(inside, self.beta / self.scale * (zs / self.scale) ** (-self.beta - 1), 0.0)
        return out if out.ndim else float(out)

    def isf(self, u):
        """Inverse survival function: the ``x`` with ``P(X > x) = u`` for ``u`` in (0, 1]."""
        u = np.asarray(u, dtype=float)
        out = self.scale * u ** (-1.0 / self.beta) - self.shift
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "scale": self.scale, "a": self.a}


@dataclass(frozen=True)
class AsymptoticScale:
    n: int
    b_n: float


@dataclass(frozen=True)
class LocalTail:
    exact: float
    surrogate: float

    @property
    def ratio(self) -> float:
        return self.exact / self.surrogate


def make_shifted_pareto(beta: float, scale: float, a: float) -> StepLaw:
    return StepLaw(float(beta), float(scale), float(a))


def _survival_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    # (0, 1]; u = 1 maps to the support's left endpoint
    return 1.0 - rng.random(size)


def sample(law: StepLaw, rng: np.random.Generator, size=None):
    """Draw steps by inverse transform.  ``size=None`` returns a single float."""
    return law.isf(_survival_uniforms(rng, size))


def local_tail(law: StepLaw, x: float, delta: float) -> LocalTail:
    """Exact ``P(X in (x, x + delta])`` and the surrogate ``delta * beta * A(x) / x``."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    exact = law.tail(x) - law.tail(x + delta)
    surrogate = delta * law.beta * law.tail(x) / x if x > 0 else float("nan")
    return LocalTail(float(exact), float(surrogate))


def conditional_tail_sample(law: StepLaw, c: float, rng: np.random.Generator, size=None):
    """Sample ``X`` given ``X > c``.

    The conditional law of a Pareto variable above ``c`` is again Pareto with
    scale ``c + shift``.  If ``c`` lies below the support, the conditioning is
    vacuous and this falls back to unconditional sampling.
    """
    if c + law.shift <= law.scale:
        return sample(law, rng, size)
    u = _survival_uniforms(rng, size)
    out = (c + law.shift) * u ** (-1.0 / law.beta) - law.shift
    # u = 1 would return c itself
    out = np.maximum(out, np.nextafter(c, np.inf))
    return out if np.ndim(out) else float(out)


def conditional_tail_mean(law: StepLaw, c: float) -> float:
    base = max(c + law.shift, law.scale)
    return law.beta * base / (law.beta - 1) - law.shift


def b_n(law: StepLaw, n: int) -> AsymptoticScale:
    """``b_n = beta * P(X > a n) / (a n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    an = law.a * n
    return AsymptoticScale(int(n), law.beta * law.tail(an) / an)
