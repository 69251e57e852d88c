"""Random walk trajectories, their dual, and path functionals.

Conventions: ``sums[0]`` is the start value, ``L_n`` and ``M_n`` range over
``S_1..S_n`` only, and the minimum over an empty index set is ``+inf`` (so
``P(L_0 >= -x) = 1``).  Argmin ties go to the earliest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dist
from .dist import StepLaw
from .estimate import EstimatorResult
from .streams import Stream, as_stream, map_chunks


@dataclass(frozen=True)
class Path:
    steps: np.ndarray
    start: float = 0.0

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def sums(self) -> np.ndarray:
        return self.start + np.concatenate([[0.0], np.cumsum(self.steps)])

    def centered(self, a: float) -> np.ndarray:
        """``S_k + a k``."""
        return self.sums + a * np.arange(self.n + 1)

    def segment(self, j: int, k: int) -> np.ndarray:
        """``(S_j, ..., S_k)``; reversed when ``j > k``."""
        s = self.sums
        if j <= k:
            return s[j : k + 1]
        return s[k : j + 1][::-1]

    def to_csv(self) -> str:
        rows = ["k,S_k"] + [f"{k},{v!r}" for k, v in enumerate(self.sums.tolist())]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class PathStats:
    L_n: float
    M_n: float
    final: float
    tau_n: int
    tau: int | None
    max_step_index: int
    max_step_value: float


@dataclass(frozen=True)
class DualPath(Path):
    """Walk with step ``-X``; positive drift ``+a``."""

    @property
    def running_min(self) -> float:
        return float(self.sums.min())


def simulate(law: StepLaw, n: int, start: float = 0.0, rng: np.random.Generator | None = None) -> Path:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    return Path(np.asarray(dist.sample(law, rng, n)), float(start))


def simulate_dual(law: StepLaw, n: int, start: float = 0.0, rng: np.random.Generator | None = None) -> DualPath:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    return DualPath(-np.asarray(dist.sample(law, rng, n)), float(start))


def stats(path: Path) -> PathStats:
    steps = np.asarray(path.steps, dtype=float)
    if steps.size == 0:
        raise ValueError("empty path")
    s = path.sums
    tail = s[1:]
    L, M = float(tail.min()), float(tail.max())
    below = np.flatnonzero(tail < 0)
    tau = int(below[0]) + 1 if below.size else None
    # first index attaining min(S_0, L_n)
    tau_n = int(np.argmin(s))
    i = int(np.argmax(steps))
    return PathStats(L, M, float(s[-1]), tau_n, tau, i + 1, float(steps[i]))


def batch_sums(steps: np.ndarray, start: float = 0.0) -> np.ndarray:
    """Partial sums ``S_1..S_n`` for each row of a (reps, n) step array."""
    s = np.cumsum(steps, axis=1)
    if start:
        s += start
    return s


def running_max(law: StepLaw, horizon: int, reps: int, rng, workers: int = 1) -> np.ndarray:
    """``max(0, S_1, ..., S_horizon)`` for ``reps`` independent walks from 0."""

    def chunk(g, size):
        s = np.cumsum(dist.sample(law, g, (size, horizon)), axis=1)
        return np.maximum(s.max(axis=1), 0.0)

    return np.concatenate(map_chunks(chunk, reps, as_stream(rng), horizon, workers))


class DualSurvival:
    """Common-random-number estimator of ``y -> P_y(L'_m >= -x)`` for the dual walk.

    The dual walk from ``y`` is ``y - S_k``, so its minimum over ``k <= m``
    stays above ``-x`` exactly when ``max_{k<=m} S_k <= x + y``.  One ensemble
    of primal running maxima therefore serves every ``(y, x)`` pair, and the
    estimate is monotone in both arguments path by path.  The horizon is
    extended by continuing the same walks, so the horizon-doubling sequence
    is nonincreasing path by path as well.
    """

    def __init__(self, law: StepLaw, reps: int, rng, horizon: int = 64, workers: int = 1):
        self.law = law
        self.reps = int(reps)
        self.stream = as_stream(rng)
        self.workers = workers
        self.horizon = 0
        self._pos = np.zeros(self.reps)
        self._max = np.zeros(self.reps)
        self._segments = 0
        self.extend(horizon)

    def extend(self, horizon: int) -> None:
        m = horizon - self.horizon
        if m <= 0:
            return
        seg = self.stream.child("segment", self._segments)
        self._segments += 1
        law = self.law
        parts = map_chunks(lambda g, size: dist.sample(law, g, (size, m)), self.reps, seg, m, self.workers)
        off = 0
        for steps in parts:
            k = len(steps)
            s = np.cumsum(steps, axis=1) + self._pos[off : off + k, None]
            self._max[off : off + k] = np.maximum(self._max[off : off + k], s.max(axis=1))
            self._pos[off : off + k] = s[:, -1]
            off += k
        self.horizon = horizon

    @property
    def maxima(self) -> np.ndarray:
        return self._max

    def curve(self, ys, x: float) -> tuple[np.ndarray, np.ndarray]:
        """Survival probabilities and binomial standard errors on a grid of starts."""
        ys = np.asarray(ys, dtype=float)
        srt = np.sort(self._max)
        p = np.searchsorted(srt, x + ys, side="right") / self.reps
        p = np.where(ys < -x, 0.0, p)
        se = np.sqrt(p * (1 - p) / max(self.reps - 1, 1))
        return p, se

    def adapt(self, ys, x: float, max_horizon: int = 1 << 16) -> None:
        """Double the horizon until the curve moves by less than ``max(0.5 se, 1e-4)``."""
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        prev, _ = self.curve(ys, x)
        while self.horizon < max_horizon:
            self.extend(2 * self.horizon)
            cur, se = self.curve(ys, x)
            if np.all(np.abs(cur - prev) < np.maximum(0.5 * se, 1e-4)):
                return
            prev = cur


def dual_survival(
    law: StepLaw,
    y: float,
    x: float,
    horizon: int | None,
    reps: int,
    rng,
    workers: int = 1,
) -> EstimatorResult:
    """Estimate ``P_y(L'_inf >= -x)`` by a finite-horizon minimum of the dual walk.

    With ``horizon=None`` the horizon starts at 64 and doubles adaptively;
    an integer horizon is used as given.
    """
    stream = as_stream(rng)
    if y < -x:
        return EstimatorResult(0.0, 0.0, 0, stream.seed, info={"horizon": 0, "y": y, "x": x})
    ds = DualSurvival(law, reps, stream, horizon or 64, workers)
    if horizon is None:
        ds.adapt([y], x)
    p, se = ds.curve([y], x)
    return EstimatorResult(float(p[0]), float(se[0]), reps, stream.seed, info={"horizon": ds.horizon, "y": y, "x": x})


def survival_curve(law: StepLaw, x: float, K: int, reps: int, rng, workers: int = 1):
    """``P(L_k >= -x)`` for ``k = 0..K`` (``P(L_0 >= -x) = 1``) with binomial errors.

    One ensemble serves every ``k``, so the curve is nonincreasing path by path.
    """

    def chunk(g, size):
        s = np.cumsum(dist.sample(law, g, (size, K)), axis=1)
        alive = np.minimum.accumulate(s, axis=1) >= -x
        return alive.sum(axis=0)

    counts = np.sum(map_chunks(chunk, reps, as_stream(rng), K, workers), axis=0)
    p = np.concatenate([[1.0], counts / reps])
    se = np.sqrt(p * (1 - p) / max(reps - 1, 1))
    return p, se
