from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EstimatorResult:
    """A Monte Carlo estimate with its standard error and provenance."""

    value: float
    stderr: float
    n_samples: int
    seed: int
    ess: float | None = None
    flags: tuple[str, ...] = ()
    info: dict = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        d = {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "ess": self.ess,
            "flags": list(self.flags),
        }
        d.update(self.info)
        return d


def mean_stderr(total: float, total_sq: float, n: int) -> tuple[float, float]:
    """Sample mean and its standard error from a sum and a sum of squares."""
    mean = total / n
    if n < 2:
        return mean, float("nan")
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def kish_ess(w) -> float:
    """``(sum w)^2 / sum w^2``."""
    w = np.asarray(w, dtype=float)
    s2 = float(np.sum(w * w))
    return float(np.sum(w)) ** 2 / s2 if s2 > 0 else 0.0


def ratio_with_stderr(num: float, se_num: float, den: float, se_den: float) -> tuple[float, float]:
    """Ratio of two independent estimates, first-order error propagation."""
    r = num / den
    rel = math.hypot(se_num / num if num else 0.0, se_den / den if den else 0.0)
    return r, abs(r) * rel


def power_tail(terms) -> tuple[float, float]:
    """Fit ``c k^-p`` to the last decade ``k in (K/10, K]`` of a series' terms.

    Returns the extrapolated sum over ``k > K`` and the fitted exponent ``p``.
    """
    terms = np.asarray(terms, dtype=float)
    K = len(terms)
    k = np.arange(1, K + 1)
    sel = (k > K // 10) & (terms > 0)
    if sel.sum() < 3:
        return 0.0, float("nan")
    slope, icpt = np.polyfit(np.log(k[sel]), np.log(terms[sel]), 1)
    p = -slope
    if p <= 1:
        return float("inf"), p
    c = math.exp(icpt)
    return c * (K + 0.5) ** (1 - p) / (p - 1), p
