"""Weighted one-sample Kolmogorov-Smirnov test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..estimate import kish_ess


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    n_eff: float
    n: int

    def to_dict(self) -> dict:
        return {"ks_statistic": self.statistic, "ks_pvalue": self.pvalue, "ks_n_eff": self.n_eff, "ks_n": self.n}


def weighted_ecdf(values, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and the weighted ECDF evaluated at each of them."""
    v = np.asarray(values, dtype=float)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    if v.shape != w.shape:
        raise ValueError("values and weights must have the same shape")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    F = np.cumsum(w)
    return v, F / F[-1]


def weighted_ks(values, weights, cdf) -> KSResult:
    """KS distance between the weighted ECDF and ``cdf``.

    The p-value is the exact one-sample Kolmogorov distribution at the
    Kish effective size ``(sum w)^2 / sum w^2`` (rounded); with equal
    weights this is the ordinary test.
    """
    v, F = weighted_ecdf(values, weights)
    if v.size == 0:
        raise ValueError("no samples")
    G = cdf(v)
    before = np.concatenate([[0.0], F[:-1]])
    d = float(max(np.max(F - G), np.max(G - before)))
    w = np.ones(v.size) if weights is None else np.asarray(weights, dtype=float)
    n_eff = kish_ess(w)
    m = max(1, int(round(n_eff)))
    return KSResult(d, float(stats.kstwo.sf(d, m)), n_eff, int(v.size))


def normal_ks(values, weights, sigma2: float) -> KSResult:
    """Weighted KS test against ``Normal(0, sigma2)``."""
    sd = float(np.sqrt(sigma2))
    return weighted_ks(values, weights, lambda t: stats.norm.cdf(t, scale=sd))


def synthetic_checks(sigma2: float, n: int = 10_000, shift: float = 0.5, trials: int = 200,
                     rng=None) -> dict:
    """Calibration and power of :func:`normal_ks` on exact draws.

    Calibration: p-values over ``trials`` null samples of size ``n // 10``,
    compared to uniform by an ordinary KS test.  Power: one sample of size
    ``n`` from ``Normal(shift * sigma, sigma2)`` must be rejected at 0.01.
    """
    g = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    sd = float(np.sqrt(sigma2))
    m = max(n // 10, 10)
    p_null = np.array([normal_ks(g.normal(0, sd, m), None, sigma2).pvalue for _ in range(trials)])
    uni = stats.kstest(p_null, "uniform").pvalue
    power = normal_ks(g.normal(shift * sd, sd, n), None, sigma2).pvalue
    return {
        "null_pvalues_uniformity_p": float(uni),
        "shifted_pvalue": float(power),
        "calibrated": bool(uni >= 0.01),
        "rejects_shift": bool(power < 0.01),
    }
