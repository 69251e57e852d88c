"""Conditioned-event asymptotics: the product formulas and the local limit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import dist
from ..dist import StepLaw
from ..estimate import EstimatorResult, ratio_with_stderr
from ..renewal import RenewalEstimate, RenewalTable
from ..streams import as_stream, map_chunks
from .importance import EventSpec, ISConfig, default_config, is_event_prob


@dataclass(frozen=True)
class RatioRecord:
    """One asymptotic-equivalence check: an estimated left side over a tabulated right side."""

    name: str
    n: int
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    ratio: float
    ratio_stderr: float
    flags: tuple[str, ...] = ()
    info: dict = field(default_factory=dict)

    @property
    def ci(self) -> tuple[float, float]:
        return self.ratio - 1.96 * self.ratio_stderr, self.ratio + 1.96 * self.ratio_stderr

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("name", "n", "lhs", "lhs_stderr", "rhs", "rhs_stderr",
                                           "ratio", "ratio_stderr")}
        d["ci"] = list(self.ci)
        d["flags"] = list(self.flags)
        d.update(self.info)
        return d


def make_record(name: str, n: int, lhs: EstimatorResult, rhs: float, rhs_se: float, **info) -> RatioRecord:
    if "infeasible" in lhs.flags:
        return RatioRecord(name, n, 0.0, 0.0, rhs, rhs_se, float("nan"), float("nan"), lhs.flags,
                           {**lhs.info, **info})
    r, rse = ratio_with_stderr(lhs.value, lhs.stderr, rhs, rhs_se)
    return RatioRecord(name, n, lhs.value, lhs.stderr, rhs, rhs_se, r, rse, lhs.flags,
                       {"ess": lhs.ess, "seed": lhs.seed, **info})


def integral_weights(est: RenewalEstimate, upper: float) -> np.ndarray:
    """Trapezoid weights for ``int_0^upper f`` over the table grid (linear interpolation at ``upper``)."""
    g = est.grid
    if upper < 0:
        raise ValueError("upper limit must be >= 0")
    if upper > g[-1] + 1e-12:
        raise ValueError(f"table grid ends at {g[-1]:g}; need coverage up to {upper:g}")
    w = np.zeros_like(g)
    k = int(np.searchsorted(g, upper, side="right")) - 1
    for i in range(max(k, 0)):
        h = g[i + 1] - g[i]
        w[i] += h / 2
        w[i + 1] += h / 2
    if k >= 0 and upper > g[k] and k + 1 < len(g):
        h = upper - g[k]
        t = h / (g[k + 1] - g[k])
        # trapezoid from g[k] to upper with f(upper) interpolated
        w[k] += h / 2 * (1 + (1 - t))
        w[k + 1] += h / 2 * t
    return w


def point_weights(est: RenewalEstimate, x: float) -> np.ndarray:
    g = est.grid
    if x > g[-1] + 1e-12:
        raise ValueError(f"table grid ends at {g[-1]:g}; need coverage up to {x:g}")
    w = np.zeros_like(g)
    k = int(np.searchsorted(g, x, side="right")) - 1
    if k + 1 >= len(g) or x == g[k]:
        w[k] = 1.0
    else:
        t = (x - g[k]) / (g[k + 1] - g[k])
        w[k], w[k + 1] = 1 - t, t
    return w


def _product_rhs(b: float, point: RenewalEstimate, x: float, integrand: RenewalEstimate, upper: float):
    """``b * point(x) * int_0^upper integrand`` with a batch-means standard error."""
    wp = point_weights(point, x)
    wi = integral_weights(integrand, upper)
    pv, iv = float(wp @ point.values), float(wi @ integrand.values)
    pb, ib = point.batches @ wp, integrand.batches @ wi
    B = len(pb)
    pse, ise = pb.std(ddof=1) / math.sqrt(B), ib.std(ddof=1) / math.sqrt(B)
    val = b * pv * iv
    se = b * math.hypot(pse * iv, pv * ise)
    return val, se, pv, iv


def theorem1_rhs(law: StepLaw, event: EventSpec, table: RenewalTable):
    """``b_n U(x) int_0^{x+T} V(-z) dz`` (min side) or ``b_n V(-x) int_0^{x-T} U(z) dz`` (max side)."""
    b = dist.b_n(law, event.n).b_n
    if event.side == "min":
        if event.window is not None:
            lo = max(event.x + event.window, 0.0)
            hi = max(event.x + event.window + 1, 0.0)
            v1, s1, pv, i1 = _product_rhs(b, table.U, event.x, table.V, hi)
            v0, s0, _, i0 = _product_rhs(b, table.U, event.x, table.V, lo)
            return v1 - v0, math.hypot(s1, s0), {"U_x": pv, "V_integral": i1 - i0}
        val, se, pv, iv = _product_rhs(b, table.U, event.x, table.V, event.x + event.T)
        return val, se, {"U_x": pv, "V_integral": iv}
    val, se, pv, iv = _product_rhs(b, table.V, event.x, table.U, event.x - event.T)
    return val, se, {"V_minus_x": pv, "U_integral": iv}


def theorem1_check(law: StepLaw, event: EventSpec, table: RenewalTable, cfg: ISConfig | None = None,
                   reps: int = 1_000_000, rng=0, n_list=None, workers: int = 1) -> list[RatioRecord]:
    """Importance-sampled left side against the renewal-table right side, for each ``n``.

    ``n_list`` defaults to ``[event.n]``; every other event field is reused.
    ``cfg=None`` builds the default configuration per ``n`` (forced index
    counted from the end of the path on the max side).
    """
    stream = as_stream(rng)
    n_list = [event.n] if n_list is None else list(n_list)
    out = []
    for n in n_list:
        ev = EventSpec(n, event.x, event.T, event.window, event.side)
        if cfg is None:
            level = ev.x if ev.side == "min" else ev.x - ev.T
            anchor = "start" if ev.side == "min" else "end"
            c = default_config(law, n, level, anchor=anchor, rng=stream.child("config", n))
        else:
            c = cfg
        lhs = is_event_prob(law, ev, c, reps, stream.child("lhs", n), workers)
        rhs, rse, parts = theorem1_rhs(law, ev, table)
        out.append(make_record("theorem1_" + ev.side, n, lhs, rhs, rse, event=ev.to_dict(),
                               b_n=dist.b_n(law, n).b_n, **parts))
    return out


def local_limit_formula(law: StepLaw, n: int, x, delta: float):
    """``delta * beta * n * A(x) / x``."""
    x = np.asarray(x, dtype=float)
    out = delta * law.beta * n * law.tail(x) / x
    return out if out.ndim else float(out)


def local_limit_check(law: StepLaw, n: int, x_list, delta: float, reps: int, rng,
                      workers: int = 1) -> list[RatioRecord]:
    """Naive frequency of ``S_n + a n in [x, x + delta)`` against ``delta beta n A(x) / x``.

    Every ``x`` must be at least ``n ** (2/3)``.
    """
    x_arr = np.asarray(list(x_list), dtype=float)
    if delta <= 0:
        raise ValueError("delta must be > 0")
    floor = n ** (2.0 / 3.0)
    if np.any(x_arr < floor - 1e-9):
        raise ValueError(f"every x must be >= n^(2/3) = {floor:.6g}; got {x_arr.min():g}")
    stream = as_stream(rng)
    an = law.a * n

    def chunk(g, size):
        st = dist.sample(law, g, (size, n)).sum(axis=1) + an
        return np.array([np.count_nonzero((st >= x) & (st < x + delta)) for x in x_arr])

    counts = np.sum(map_chunks(chunk, reps, stream, n, workers), axis=0)
    out = []
    for x, c in zip(x_arr, counts):
        p = c / reps
        lhs = EstimatorResult(float(p), math.sqrt(p * (1 - p) / reps), reps, stream.seed, float(c))
        out.append(make_record("local_limit", n, lhs, local_limit_formula(law, n, x, delta), 0.0,
                               x=float(x), delta=float(delta)))
    return out
