"""Trajectory decomposition of the conditioned walk.

Everything here reads one importance-sampled ensemble restricted to the
event (:class:`ConditionedSample`) through self-normalized weights, and
compares it with independently estimated limit objects: the jump-time law
``pi_j``, the Gaussian jump-size fluctuation, the boundary measure ``mu``
with normalizer ``theta``, and the pre/post-jump factorization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import dist, walk
from ..dist import StepLaw
from ..estimate import power_tail
from ..streams import as_stream, map_chunks
from .importance import EventSpec, ISConfig, default_config, simulate_weighted
from .ks import KSResult, normal_ks

MIN_CONDITIONED_ESS = 1000


# ---------------------------------------------------------------- probes


@dataclass(frozen=True)
class Probe:
    """A bounded functional pair ``(F, F_{n-j})``.

    ``pre`` maps rows ``(S_0, ..., S_{j-1})`` to values and ``post`` maps
    rows of a forward post-jump segment ``(S_j, ..., S_n)``; both must stay
    within ``bounds``.
    """

    name: str
    pre: Callable[[np.ndarray], np.ndarray]
    post: Callable[[np.ndarray], np.ndarray]
    bounds: tuple[float, float] = (-1.0, 1.0)


def _one(s):
    return np.ones(len(s))


def default_probes(c0: float = -1.0, clip: float = 10.0) -> list[Probe]:
    def pre_ind(s):
        return (s[:, -1] > c0).astype(float)

    def term(s):
        return np.clip(s[:, -1], -clip, clip)

    def smin(s):
        return np.clip(s.min(axis=1), -clip, clip)

    def quarter(s):
        q = max(1, s.shape[1] // 4)
        return np.clip(s[:, :q].mean(axis=1) / s.shape[1], -clip, clip)

    return [
        Probe("unit", _one, _one, (1.0, 1.0)),
        Probe("pre_indicator", pre_ind, _one, (0.0, 1.0)),
        Probe("clipped_terminal", _one, term, (-clip, clip)),
        Probe("post_minimum", _one, smin, (-clip, clip)),
        Probe("first_quarter_mean", _one, quarter, (-clip, clip)),
    ]


def check_probe(law: StepLaw, probe: Probe, j: int, n: int, rng=0, reps: int = 256) -> None:
    """Reject a probe that leaves its declared range on sampled and extreme paths."""
    g = as_stream(rng).child("probe-range").generator()
    lo, hi = probe.bounds
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise ValueError(f"probe {probe.name!r}: bounds must be finite")
    m = n - j + 1
    pre = np.concatenate([np.zeros((reps, 1)), np.cumsum(dist.sample(law, g, (reps, j - 1)), axis=1)], axis=1)
    post = np.cumsum(dist.sample(law, g, (reps, m)), axis=1)
    # scaled copies probe the range far from typical paths
    for scale in (1.0, 1e3):
        for arr, f, part in ((pre, probe.pre, "pre"), (post, probe.post, "post")):
            v = np.asarray(f(arr * scale), dtype=float)
            if v.shape != (reps,):
                raise ValueError(f"probe {probe.name!r} {part}: expected one value per row")
            if not np.all(np.isfinite(v)) or v.min() < lo - 1e-12 or v.max() > hi + 1e-12:
                raise ValueError(f"probe {probe.name!r} {part}: values outside declared bounds {probe.bounds}")


# ---------------------------------------------------------------- conditioned ensemble


@dataclass
class ConditionedSample:
    """Importance-sampled paths that satisfy the event, one entry per path.

    ``kappa`` is the first index with ``X_j >= a n / 2`` (0 when there is
    none); indices are 1-based.
    """

    law: StepLaw
    event: EventSpec
    reps: int
    seed: int
    w: np.ndarray
    kappa: np.ndarray
    x_kappa: np.ndarray
    max_index: np.ndarray
    max_value: np.ndarray
    second_value: np.ndarray
    final: np.ndarray
    probes: dict = field(default_factory=dict)
    probe_j: int | None = None

    @property
    def ess(self) -> float:
        s2 = float(np.sum(self.w * self.w))
        return float(np.sum(self.w)) ** 2 / s2 if s2 > 0 else 0.0

    @property
    def probability(self) -> float:
        """Unbiased estimate of the event probability."""
        return float(np.sum(self.w)) / self.reps

    @property
    def probability_stderr(self) -> float:
        p = self.probability
        m2 = float(np.sum(self.w * self.w)) / self.reps
        return math.sqrt(max(m2 - p * p, 0.0) / max(self.reps - 1, 1))

    def weighted_mean(self, values, mask=None) -> tuple[float, float]:
        """Self-normalized mean of ``values`` over the (masked) sample, with delta-method error."""
        w = self.w if mask is None else self.w * mask
        sw = w.sum()
        if sw <= 0:
            return math.nan, math.nan
        v = np.asarray(values, dtype=float)
        m = float(np.sum(w * v) / sw)
        # ratio estimator over all reps: var of (w (v - m)) / (mean w)^2
        se = math.sqrt(float(np.sum((w * (v - m)) ** 2))) / sw
        return m, se

    def fraction(self, mask) -> tuple[float, float]:
        return self.weighted_mean(np.asarray(mask, dtype=float))


def collect(law: StepLaw, event: EventSpec, cfg: ISConfig | None, reps: int, rng, workers: int = 1,
            probes: list[Probe] | None = None, j: int | None = None) -> ConditionedSample:
    """Run the importance sampler and keep the per-path features of event paths.

    With ``probes`` and ``j`` each probe is also evaluated on the pre-jump
    path ``(S_0..S_{j-1})`` and the post-jump segment ``(S_j..S_n)`` of the
    paths with ``kappa = j``.
    """
    n = event.n
    c = law.a * n / 2
    stream = as_stream(rng)
    if probes and not (j and 1 <= j <= n):
        raise ValueError("probes need a jump index 1 <= j <= n")

    def red(steps, sums, w):
        hit = event.indicator(sums)
        st, sm, wh = steps[hit], sums[hit], w[hit]
        big = st >= c
        has = big.any(axis=1)
        kap = np.where(has, np.argmax(big, axis=1) + 1, 0)
        xk = np.where(has, st[np.arange(len(st)), np.maximum(kap - 1, 0)], np.nan)
        mi = np.argmax(st, axis=1) if len(st) else np.zeros(0, int)
        mv = st[np.arange(len(st)), mi] if len(st) else np.zeros(0)
        sv = np.partition(st, -2, axis=1)[:, -2] if n > 1 and len(st) else np.full(len(st), -np.inf)
        out = {"w": wh, "kappa": kap, "x_kappa": xk, "max_index": mi + 1, "max_value": mv,
               "second_value": sv, "final": sm[:, -1] if len(sm) else np.zeros(0)}
        if probes:
            sel = kap == j
            full = np.concatenate([np.zeros((int(sel.sum()), 1)), sm[sel]], axis=1)
            pre, post = full[:, :j], full[:, j:]
            for p in probes:
                vals = np.full((len(st), 2), np.nan)
                vals[sel, 0] = p.pre(pre)
                vals[sel, 1] = p.post(post)
                out["probe:" + p.name] = vals
        return out

    parts = simulate_weighted(law, n, cfg, reps, stream, red, workers)
    cat = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    pr = {k[6:]: v for k, v in cat.items() if k.startswith("probe:")}
    return ConditionedSample(law, event, reps, stream.seed, cat["w"], cat["kappa"], cat["x_kappa"],
                             cat["max_index"], cat["max_value"], cat["second_value"], cat["final"],
                             pr, j if probes else None)


def _config_for(law: StepLaw, event: EventSpec, cfg, J_max: int, rng) -> ISConfig:
    if cfg is not None:
        return cfg
    return default_config(law, event.n, event.x, J_max=J_max, rng=as_stream(rng).child("config"))


def _flags(sample: ConditionedSample, floor: float = MIN_CONDITIONED_ESS) -> tuple[str, ...]:
    return ("low_ess",) if sample.ess < floor else ()


# ---------------------------------------------------------------- mu and theta


@dataclass(frozen=True)
class MuTheta:
    x: float
    T: float
    grid: np.ndarray
    survival: np.ndarray
    survival_stderr: np.ndarray
    density: np.ndarray
    theta: float
    theta_stderr: float
    theta_exact: float
    horizon: int
    reps: int
    seed: int

    @property
    def density_integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def to_dict(self) -> dict:
        return {
            "x": self.x, "T": self.T, "theta": self.theta, "theta_stderr": self.theta_stderr,
            "theta_exact": self.theta_exact, "density_integral": self.density_integral,
            "horizon": self.horizon, "reps": self.reps, "seed": self.seed, "grid_points": int(self.grid.size),
        }


def mu_theta(law: StepLaw, x: float, T: float, grid_step: float = 0.05, horizon: int | None = None,
             reps: int = 100_000, rng=0, workers: int = 1) -> MuTheta:
    """Boundary density ``mu(y) = P_y(L'_inf >= -x) / theta`` on ``[-x, T]``.

    ``theta`` is the trapezoid integral of the survival curve on the grid.
    ``theta_exact`` integrates each path's survival indicator in closed form,
    ``(T + x - max_k S_k)^+``, so it carries no quadrature error.
    """
    if not T > -x:
        raise ValueError(f"need T > -x, got T={T}, x={x}")
    if grid_step <= 0:
        raise ValueError("grid_step must be > 0")
    m = max(1, int(math.ceil((T + x) / grid_step)))
    ys = np.linspace(-x, T, m + 1)
    ds = walk.DualSurvival(law, reps, as_stream(rng), horizon or 64, workers)
    if horizon is None:
        ds.adapt(ys, x)
    p, se = ds.curve(ys, x)
    theta = float(np.trapezoid(p, ys))
    per_path = np.maximum(T + x - ds.maxima, 0.0)
    theta_exact = float(per_path.mean())
    theta_se = float(per_path.std(ddof=1) / math.sqrt(reps))
    return MuTheta(float(x), float(T), ys, p, se, p / theta, theta, theta_se, theta_exact, ds.horizon, reps,
                   as_stream(rng).seed)


# ---------------------------------------------------------------- pi_j


@dataclass(frozen=True)
class PiLaw:
    """Jump-time law: theoretical ``pi_j`` (``j = 1..J_max``) from survival probabilities."""

    x: float
    survival: np.ndarray
    survival_stderr: np.ndarray
    total: float
    tail: float
    J_max: int

    @property
    def pi(self) -> np.ndarray:
        """``P(L_{j-1} >= -x) / sum_k P(L_k >= -x)`` for ``j = 1..J_max``."""
        return self.survival[: self.J_max] / self.total

    @property
    def pi_alt(self) -> np.ndarray:
        """The alternative indexing ``P(L_j >= -x) / sum_k P(L_k >= -x)``, ``j = 1..J_max``."""
        return self.survival[1 : self.J_max + 1] / self.total

    @property
    def truncation_tail(self) -> float:
        return 1.0 - float(self.pi.sum())


def pi_theoretical(law: StepLaw, x: float, K: int = 400, reps: int = 200_000, rng=0, coverage: float = 0.99,
                   J_min: int = 10, workers: int = 1) -> PiLaw:
    """``pi_j`` with ``J_max`` the smallest ``J >= J_min`` whose mass reaches ``coverage``.

    The normalizing sum is the estimated ``sum_{k<=K} P(L_k >= -x)`` plus a
    power-law extrapolation of its last decade.
    """
    p, se = walk.survival_curve(law, x, K, reps, as_stream(rng), workers)
    tail, _ = power_tail(p[1:])
    tail = 0.0 if not np.isfinite(tail) else tail
    total = float(p.sum()) + tail
    cum = np.cumsum(p) / total
    hit = np.flatnonzero(cum >= coverage)
    J = int(hit[0]) + 1 if hit.size else K + 1
    return PiLaw(float(x), p, se, total, float(tail), max(J, J_min))


# ---------------------------------------------------------------- report


@dataclass
class DecompositionReport:
    law: StepLaw
    event: EventSpec
    seed: int
    n_samples: int
    ess: float
    pi_empirical: np.ndarray | None = None
    pi_empirical_stderr: np.ndarray | None = None
    pi_theoretical: np.ndarray | None = None
    pi_tail: float | None = None
    tv: float | None = None
    ks: KSResult | None = None
    probes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    info: dict = field(default_factory=dict)

    def base(self) -> dict:
        return {"law": self.law.to_dict(), "event": self.event.to_dict(), "seed": self.seed,
                "n_samples": self.n_samples, "ess": self.ess, "flags": list(self.flags)}

    def records(self) -> list[dict]:
        """One JSON-ready dict per reported quantity group."""
        out = []
        if self.pi_theoretical is not None:
            out.append({"experiment": "pi", **self.base(), "pi_empirical": _lst(self.pi_empirical),
                        "pi_empirical_stderr": _lst(self.pi_empirical_stderr),
                        "pi_theoretical": _lst(self.pi_theoretical), "pi_truncation_tail": self.pi_tail,
                        "tv": self.tv, **{k: v for k, v in self.info.items() if k.startswith("pi")}})
        if self.ks is not None:
            out.append({"experiment": "jump_size", **self.base(), **self.ks.to_dict()})
        for p in self.probes:
            out.append({"experiment": "decomposition", **self.base(), **p})
        if self.diagnostics:
            out.append({"experiment": "single_jump", **self.base(), **self.diagnostics})
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, allow_nan=True) + "\n" for r in self.records())


def _lst(a):
    return None if a is None else [float(v) for v in np.asarray(a)]


def _report(sample: ConditionedSample, **kw) -> DecompositionReport:
    return DecompositionReport(sample.law, sample.event, sample.seed, sample.reps, sample.ess,
                               flags=_flags(sample), **kw)


def pi_distribution(law: StepLaw, x: float, T: float, n: int, cfg: ISConfig | None = None,
                    reps: int = 1_000_000, rng=0, sample: ConditionedSample | None = None,
                    theory: PiLaw | None = None, J_compare: int = 10, workers: int = 1) -> DecompositionReport:
    """Empirical jump-time frequencies against ``pi_j ~ P(L_{j-1} >= -x)``.

    ``tv`` is half the L1 distance over ``j <= J_compare`` plus the
    lumped remainder (later jumps and paths without a jump).
    """
    stream = as_stream(rng)
    theory = theory or pi_theoretical(law, x, rng=stream.child("pi-theory"), workers=workers)
    if cfg is not None and cfg.J_max < 10:
        raise ValueError("pi_distribution needs J_max >= 10")
    event = EventSpec(n, x, T)
    if sample is None:
        cfg = _config_for(law, event, cfg, max(theory.J_max, 10), stream)
        sample = collect(law, event, cfg, reps, stream.child("sample"), workers)
    J = max(theory.J_max, J_compare)
    emp, emp_se = np.zeros(J), np.zeros(J)
    for i in range(J):
        emp[i], emp_se[i] = sample.fraction(sample.kappa == i + 1)
    th_full = theory.survival[:J] / theory.total
    jc = J_compare
    rest_e = 1.0 - emp[:jc].sum()
    rest_t = 1.0 - th_full[:jc].sum()
    tv = 0.5 * (float(np.abs(emp[:jc] - th_full[:jc]).sum()) + abs(rest_e - rest_t))
    info = {"pi_J_max": theory.J_max, "pi_theoretical_sum": float(theory.pi.sum()),
            "pi_alt_index": _lst(theory.pi_alt), "pi_survival_total": theory.total,
            "pi_survival_tail": theory.tail}
    return _report(sample, pi_empirical=emp, pi_empirical_stderr=emp_se, pi_theoretical=theory.pi,
                   pi_tail=theory.truncation_tail, tv=tv, info=info)


def jump_size_values(sample: ConditionedSample) -> tuple[np.ndarray, np.ndarray]:
    """``(X_kappa - a n) / sqrt(n)`` and weights over paths that have a jump."""
    n = sample.event.n
    has = sample.kappa > 0
    z = (sample.x_kappa[has] - sample.law.a * n) / math.sqrt(n)
    return z, sample.w[has]


def jump_size_test(law: StepLaw, x: float, T: float, n: int, cfg: ISConfig | None = None,
                   reps: int = 1_000_000, rng=0, sample: ConditionedSample | None = None,
                   workers: int = 1) -> DecompositionReport:
    """Weighted KS test of the normalized jump size against ``Normal(0, sigma^2)``."""
    stream = as_stream(rng)
    event = EventSpec(n, x, T)
    if sample is None:
        sample = collect(law, event, _config_for(law, event, cfg, 20, stream), reps, stream.child("sample"),
                         workers)
    z, w = jump_size_values(sample)
    if z.size == 0:
        return _report(sample, info={"reason": "no conditioned jumps"})
    return _report(sample, ks=normal_ks(z, w, law.sigma2))


def _pre_factor(law: StepLaw, x: float, j: int, probes: list[Probe], reps: int, stream, workers):
    """``E[F(S_0..S_{j-1}) | L_{j-1} >= -x]`` by direct simulation."""
    if j == 1:
        s0 = np.zeros((1, 1))
        return {p.name: (float(p.pre(s0)[0]), 0.0) for p in probes}, 1.0

    def chunk(g, size):
        s = np.cumsum(dist.sample(law, g, (size, j - 1)), axis=1)
        keep = s.min(axis=1) >= -x
        full = np.concatenate([np.zeros((int(keep.sum()), 1)), s[keep]], axis=1)
        return keep.sum(), [p.pre(full) for p in probes]

    parts = map_chunks(chunk, reps, stream, j, workers)
    kept = sum(k for k, _ in parts)
    out = {}
    for i, p in enumerate(probes):
        v = np.concatenate([vals[i] for _, vals in parts])
        out[p.name] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan)
    return out, kept / reps


def _post_factor(law: StepLaw, x: float, T: float, m: int, H: int, probes: list[Probe], reps: int, stream,
                 workers):
    """``E_mu[F(S'_{m,0}) | L'_inf >= -x]`` as a ratio of uniform-start averages.

    Starts are uniform on ``[-x, T]``; the survival indicator uses the
    dual minimum over ``H >= m`` steps; the probe sees the reversed first
    ``m`` dual steps ``(y - S_m, ..., y - S_0)``.
    """
    H = max(H, m)

    def chunk(g, size):
        y = g.uniform(-x, T, size)
        s = np.cumsum(dist.sample(law, g, (size, H)), axis=1)
        alive = (np.maximum(s.max(axis=1), 0.0) <= x + y)
        d = y[alive, None] - np.concatenate([np.zeros((size, 1)), s[:, :m]], axis=1)[alive]
        rev = d[:, ::-1]
        return alive.sum(), [p.post(rev) for p in probes]

    parts = map_chunks(chunk, reps, stream, H, workers)
    alive = sum(a for a, _ in parts)
    out = {}
    for i, p in enumerate(probes):
        v = np.concatenate([vals[i] for _, vals in parts])
        # with reps fixed, the ratio estimator's error is that of a mean over survivors
        out[p.name] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan)
    return out, alive / reps


def decomposition_test(law: StepLaw, x: float, T: float, n: int, j: int = 1, probes: list[Probe] | None = None,
                       cfg: ISConfig | None = None, horizon: int | None = None, reps: int = 1_000_000, rng=0,
                       factor_reps: int = 200_000, sample: ConditionedSample | None = None,
                       workers: int = 1) -> DecompositionReport:
    """Conditioned joint expectation of each probe pair against the product of its limit factors.

    The joint term is restricted to paths whose first big jump is at ``j``.
    """
    stream = as_stream(rng)
    probes = default_probes() if probes is None else list(probes)
    if not 1 <= j <= n:
        raise ValueError("need 1 <= j <= n")
    for p in probes:
        check_probe(law, p, j, n, stream)
    event = EventSpec(n, x, T)
    if sample is None or sample.probe_j != j or set(sample.probes) != {p.name for p in probes}:
        sample = collect(law, event, _config_for(law, event, cfg, 20, stream), reps, stream.child("sample"),
                         workers, probes, j)
    if horizon is None:
        ds = walk.DualSurvival(law, 20_000, stream.child("horizon"), 64, workers)
        ds.adapt(np.linspace(-x, T, 21), x)
        horizon = ds.horizon
    pre, pre_rate = _pre_factor(law, x, j, probes, factor_reps, stream.child("pre"), workers)
    post, post_rate = _post_factor(law, x, T, n - j, horizon, probes, factor_reps, stream.child("post"), workers)
    at_j = sample.kappa == j
    rows = []
    for p in probes:
        vals = sample.probes[p.name]
        prod = np.where(at_j, vals[:, 0] * vals[:, 1], 0.0)
        joint, joint_se = sample.weighted_mean(prod, at_j.astype(float))
        (a, a_se), (b, b_se) = pre[p.name], post[p.name]
        diff = joint - a * b
        se = math.sqrt(joint_se ** 2 + (b * a_se) ** 2 + (a * b_se) ** 2)
        rows.append({"probe": p.name, "j": j, "joint": joint, "joint_stderr": joint_se, "pre_factor": a,
                     "pre_factor_stderr": a_se, "post_factor": b, "post_factor_stderr": b_se,
                     "difference": diff, "difference_stderr": se,
                     "z": abs(diff) / se if se > 0 else (0.0 if diff == 0 else math.inf),
                     "horizon": horizon, "pre_survival_rate": pre_rate, "post_survival_rate": post_rate})
    at_j_mass, at_j_se = sample.fraction(at_j)
    return _report(sample, probes=rows, info={"kappa_eq_j_fraction": at_j_mass, "kappa_eq_j_stderr": at_j_se})


def single_jump_diagnostics(law: StepLaw, event: EventSpec, M=(1.0, 2.0, 5.0, 10.0), delta: float = 0.125,
                            cfg: ISConfig | None = None, reps: int = 1_000_000, rng=0, J_list=(1, 2, 5, 10),
                            sample: ConditionedSample | None = None, workers: int = 1) -> DecompositionReport:
    """Conditioned frequencies of the events that a single early jump rules out.

    (a) no step above ``delta a n``; (b) a second step above it; (c) the
    largest step outside ``[a n - M sqrt(n), a n + M sqrt(n)]`` per ``M``;
    (d) the largest step after index ``J`` per ``J``.  Each is given as a
    conditional probability and as ``P(event and A) / b_n``.
    """
    if not 0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    M = sorted(float(m) for m in np.atleast_1d(M))
    if any(m <= 0 for m in M):
        raise ValueError("M must be > 0")
    stream = as_stream(rng)
    n = event.n
    if sample is None:
        sample = collect(law, event, _config_for(law, event, cfg, 20, stream), reps, stream.child("sample"), workers)
    b = dist.b_n(law, n).b_n
    thr = delta * law.a * n
    an, rn = law.a * n, math.sqrt(n)

    def both(mask):
        f, se = sample.fraction(mask)
        un = float(np.sum(sample.w * mask)) / sample.reps
        return {"conditional": f, "conditional_stderr": se, "over_b_n": un / b}

    diag = {
        "delta": delta,
        "threshold": thr,
        "b_n": b,
        "event_probability": sample.probability,
        "event_probability_stderr": sample.probability_stderr,
        "no_big_step": both(sample.max_value <= thr),
        "second_big_step": both(sample.second_value > thr),
        "max_step_outside": {repr(m): both(np.abs(sample.max_value - an) > m * rn) for m in M},
        "max_step_after": {str(int(J)): both(sample.max_index > J) for J in J_list},
    }
    return _report(sample, diagnostics=diag)
