"""Naive and single-big-jump importance sampling for conditioned walk events.

The proposal is a defensive mixture.  With probability ``eps`` all ``n``
steps come from the nominal law; otherwise an index ``j`` is drawn from a
prior over ``1..J_max`` and step ``j`` is replaced by a draw of ``X`` given
``X > c``.  The likelihood ratio of the whole step vector is

    f^n / q = 1 / (eps + (1 - eps) * sum_j prior_j * 1{X_j > c} / A(c)),

the same closed form for every sample whichever component produced it, so
the estimator is unbiased for any event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import dist, walk
from ..dist import StepLaw
from ..estimate import EstimatorResult, kish_ess
from ..streams import Stream, as_stream, fsum_arrays, map_chunks

MIN_ESS = 100


@dataclass(frozen=True)
class EventSpec:
    """``{L_n >= -x, S_n <= T}`` (``side="min"``) or ``{M_n < x, S_n > T}`` (``side="max"``).

    With ``window=l`` the terminal condition on the min side becomes
    ``S_n in [l, l + 1)``.  Strict and non-strict terminal inequalities are
    not distinguished: the step law is continuous.
    """

    n: int
    x: float
    T: float
    window: float | None = None
    side: str = "min"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.x < 0:
            raise ValueError("barrier level x must be >= 0")
        if self.side not in ("min", "max"):
            raise ValueError("side must be 'min' or 'max'")
        if self.side == "min" and self.window is None and not self.T > -self.x:
            raise ValueError(f"need T > -x, got T={self.T}, x={self.x}")
        if self.side == "max" and not self.T < self.x:
            raise ValueError(f"need T < x, got T={self.T}, x={self.x}")
        if self.window is not None and self.side != "min":
            raise ValueError("window mode is defined for the min side only")

    def infeasibility(self, law: StepLaw) -> dict | None:
        """A certificate dict when the support makes the event impossible, else None."""
        if self.side == "max":
            return None
        lowest = self.n * law.lower
        upper = self.T if self.window is None else self.window + 1
        if self.window is not None and upper <= -self.x:
            return {"reason": "terminal window lies below the barrier", "window_top": upper, "barrier": -self.x}
        if lowest > upper:
            return {
                "reason": "terminal level below the lowest reachable value n * support_min",
                "lowest_reachable": lowest,
                "terminal_cap": upper,
            }
        return None

    def indicator(self, sums: np.ndarray) -> np.ndarray:
        """Event indicator for rows of partial sums ``S_1..S_n``."""
        final = sums[:, -1]
        if self.side == "max":
            return (sums.max(axis=1) < self.x) & (final > self.T)
        ok = sums.min(axis=1) >= -self.x
        if self.window is None:
            return ok & (final <= self.T)
        return ok & (final >= self.window) & (final < self.window + 1)

    def to_dict(self) -> dict:
        return {"n": self.n, "x": self.x, "T": self.T, "window": self.window, "side": self.side}


@dataclass(frozen=True)
class ISConfig:
    J_max: int
    jump_threshold: float
    defensive_weight: float = 0.05
    prior: np.ndarray = field(default=None)
    anchor: str = "start"

    def __post_init__(self):
        if self.J_max < 1:
            raise ValueError("J_max must be >= 1")
        if not 0 < self.defensive_weight <= 1:
            raise ValueError("defensive_weight must lie in (0, 1]")
        prior = np.full(self.J_max, 1.0 / self.J_max) if self.prior is None else np.asarray(self.prior, float)
        if prior.shape != (self.J_max,) or np.any(prior <= 0):
            raise ValueError("prior must have J_max strictly positive entries")
        object.__setattr__(self, "prior", prior / prior.sum())
        if self.anchor not in ("start", "end"):
            raise ValueError("anchor must be 'start' or 'end'")

    def positions(self, n: int) -> np.ndarray:
        """0-based step indices the prior refers to."""
        j = np.arange(self.J_max)
        return j if self.anchor == "start" else n - 1 - j

    def to_dict(self) -> dict:
        return {
            "J_max": self.J_max,
            "jump_threshold": self.jump_threshold,
            "defensive_weight": self.defensive_weight,
            "anchor": self.anchor,
        }


def default_config(law: StepLaw, n: int, x: float, J_max: int = 20, eps: float = 0.05,
                   prior: str = "survival", anchor: str = "start", pilot_reps: int = 20_000,
                   rng=0) -> ISConfig:
    """Jump threshold ``a n / 2``; prior proportional to ``P(L_{j-1} >= -x)`` or uniform."""
    J_max = min(int(J_max), n)
    if prior == "uniform":
        p = None
    elif prior == "survival":
        if J_max > 1:
            p, _ = walk.survival_curve(law, x, J_max - 1, pilot_reps, as_stream(rng).child("prior"))
        else:
            p = np.ones(1)
        p = np.maximum(p, 1e-4 * p[0])
    else:
        raise ValueError("prior must be 'survival' or 'uniform'")
    return ISConfig(J_max, law.a * n / 2, eps, p, anchor)


@dataclass(frozen=True)
class WeightedSample:
    path: walk.Path
    log_weight: float
    event_indicator: bool

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)


def draw_proposal(law: StepLaw, n: int, cfg: ISConfig | None, g: np.random.Generator, size: int):
    """One chunk of step vectors and their log likelihood ratios.

    Nominal steps are drawn first, so with ``cfg=None`` or
    ``defensive_weight=1`` the paths coincide with naive sampling on the
    same generator.
    """
    steps = dist.sample(law, g, (size, n))
    if cfg is None:
        return steps, np.zeros(size)
    eps = cfg.defensive_weight
    pos = cfg.positions(n)
    c = cfg.jump_threshold
    Ac = law.tail(c)
    forced = g.random(size) >= eps
    nf = int(forced.sum())
    if nf:
        which = g.choice(cfg.J_max, size=nf, p=cfg.prior)
        rows = np.flatnonzero(forced)
        steps[rows, pos[which]] = dist.conditional_tail_sample(law, c, g, nf)
    big = steps[:, pos] > c
    dens = eps + (1.0 - eps) * (big @ cfg.prior) / Ac
    return steps, -np.log(dens)


def simulate_weighted(law: StepLaw, n: int, cfg: ISConfig | None, reps: int, rng,
                      reducer: Callable, workers: int = 1) -> list:
    """Apply ``reducer(steps, sums, w)`` to every chunk of proposal draws; chunk-ordered results."""

    def chunk(g, size):
        steps, logw = draw_proposal(law, n, cfg, g, size)
        return reducer(steps, np.cumsum(steps, axis=1), np.exp(logw))

    return map_chunks(chunk, reps, as_stream(rng), n, workers)


def weighted_samples(law: StepLaw, event: EventSpec, cfg: ISConfig | None, reps: int, rng) -> list[WeightedSample]:
    """Materialise individual weighted samples (small runs only)."""
    out: list[WeightedSample] = []

    def red(steps, sums, w):
        ind = event.indicator(sums)
        for i in range(len(steps)):
            out.append(WeightedSample(walk.Path(steps[i].copy()), float(np.log(w[i])), bool(ind[i])))
        return None

    simulate_weighted(law, event.n, cfg, reps, rng, red)
    return out


def _mean_result(parts, reps, seed, ess_floor, extra) -> EstimatorResult:
    tot, tot_sq, hits, wsum, w2sum = fsum_arrays([np.asarray(p) for p in parts])
    mean = tot / reps
    var = max(tot_sq / reps - mean * mean, 0.0) * reps / max(reps - 1, 1)
    se = math.sqrt(var / reps)
    ess = tot * tot / tot_sq if tot_sq > 0 else 0.0
    flags = ("low_ess",) if ess < ess_floor else ()
    info = {"hits": int(hits), **extra}
    return EstimatorResult(float(mean), float(se), reps, seed, float(ess), flags, info)


def is_expectation(law: StepLaw, n: int, func: Callable, cfg: ISConfig | None, reps: int, rng,
                   workers: int = 1, ess_floor: float = MIN_ESS, extra: dict | None = None) -> EstimatorResult:
    """Unbiased estimate of ``E[func(steps, sums)]`` under the nominal law.

    ``ess`` is the Kish effective size of the nonzero terms ``w * func``.
    """
    stream = as_stream(rng)

    def red(steps, sums, w):
        h = func(steps, sums) * w
        return [h.sum(), (h * h).sum(), np.count_nonzero(h), w.sum(), (w * w).sum()]

    parts = simulate_weighted(law, n, cfg, reps, stream, red, workers)
    info = dict(extra or {})
    if cfg is not None:
        info["is_config"] = cfg.to_dict()
    return _mean_result(parts, reps, stream.seed, ess_floor, info)


def _infeasible(event: EventSpec, cert: dict, seed: int) -> EstimatorResult:
    return EstimatorResult(0.0, 0.0, 0, seed, None, ("infeasible",), {"certificate": cert, "event": event.to_dict()})


def naive_event_prob(law: StepLaw, event: EventSpec, reps: int, rng, workers: int = 1) -> EstimatorResult:
    """Direct Monte Carlo frequency of the event, with binomial standard error."""
    stream = as_stream(rng)
    cert = event.infeasibility(law)
    if cert is not None:
        return _infeasible(event, cert, stream.seed)
    return is_expectation(law, event.n, lambda st, s: event.indicator(s).astype(float), None, reps, stream,
                          workers, ess_floor=0, extra={"event": event.to_dict()})


def is_event_prob(law: StepLaw, event: EventSpec, cfg: ISConfig, reps: int, rng,
                  workers: int = 1) -> EstimatorResult:
    """Importance-sampling estimate; flagged ``low_ess`` when the effective size is below 100."""
    stream = as_stream(rng)
    cert = event.infeasibility(law)
    if cert is not None:
        return _infeasible(event, cert, stream.seed)
    return is_expectation(law, event.n, lambda st, s: event.indicator(s).astype(float), cfg, reps, stream,
                          workers, extra={"event": event.to_dict()})
