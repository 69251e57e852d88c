"""Renewal functions U, V, the constant D and the Laplace functions K1, K2.

All series are estimated from one shared path ensemble per function: the
contribution of every grid point and every index ``k <= K`` comes from the
same walks, so monotonicity in the grid argument holds path by path.  When
the truncation rule asks for a larger ``K`` the same walks are continued.
Standard errors come from batch means, which also give the error of any
linear functional of a table (quadratures in particular).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import dist
from .dist import StepLaw
from .estimate import EstimatorResult, power_tail, ratio_with_stderr
from .streams import Stream, as_stream, chunk_sizes

DEFAULT_K = 200
TRUNCATION_TOL = 1e-3
MAX_K = 12800
N_BATCHES = 100


@dataclass(frozen=True)
class RenewalEstimate:
    """One renewal function on a grid (``U(x)`` or ``V(-z)``)."""

    kind: str
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    batches: np.ndarray
    K: int
    reps: int
    seed: int
    terms: np.ndarray
    survival: np.ndarray

    def __call__(self, x):
        """Linear interpolation on the grid; 0 for negative arguments."""
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.grid, self.values)
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class RenewalTable:
    law: StepLaw
    grid: np.ndarray
    U: RenewalEstimate
    V: RenewalEstimate
    seed: int

    @property
    def reps(self) -> int:
        return self.U.reps

    @property
    def V_bound(self) -> float:
        """``1 + sum_k P(L_k >= 0)`` up to the V truncation, an upper bound for ``V(-z)``."""
        return 1.0 + float(self.V.survival.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        law = self.law
        header = {
            "beta": law.beta,
            "scale": law.scale,
            "a": law.a,
            "K_U": self.U.K,
            "K_V": self.V.K,
            "reps": self.reps,
            "seed": self.seed,
        }
        for k, v in header.items():
            buf.write(f"# {k} = {v!r}\n")
        buf.write("x,U,U_stderr,z,V,V_stderr\n")
        for i, g in enumerate(self.grid):
            row = (g, self.U.values[i], self.U.stderr[i], g, self.V.values[i], self.V.stderr[i])
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class SeriesEstimate:
    value: float
    terms: np.ndarray
    K: int
    tail_bound: float
    stderr: float
    tail_exponent: float = float("nan")


@dataclass(frozen=True)
class LaplaceCheck:
    lam: float
    K1_integral: float
    K1_integral_stderr: float
    K1_series: float
    K1_series_stderr: float
    K2_integral: float
    K2_integral_stderr: float
    K2_series: float
    K2_series_stderr: float
    info: dict = field(default_factory=dict)

    def z_score(self, which: int) -> float:
        if which == 1:
            d, s1, s2 = self.K1_series - self.K1_integral, self.K1_series_stderr, self.K1_integral_stderr
        else:
            d, s1, s2 = self.K2_series - self.K2_integral, self.K2_series_stderr, self.K2_integral_stderr
        return abs(d) / math.hypot(s1, s2)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "info"}
        d.update(self.info)
        return d


class LadderEnsemble:
    """Walks from 0 followed while they stay strictly below 0 (``"U"``) or at/above 0 (``"V"``).

    :meth:`advance` simulates indices ``k`` in ``(self.K, K]`` for the live
    walks and hands every chunk to the visitors as
    ``visitor(idx, live, s, k0)`` where ``s[i, m] = S_{k0+m+1}`` for walk
    ``idx[i]`` and ``live`` marks the entries still on the required side.
    """

    def __init__(self, law: StepLaw, kind: str, reps: int, rng):
        if kind not in ("U", "V"):
            raise ValueError("kind must be 'U' or 'V'")
        self.law = law
        self.kind = kind
        self.reps = int(reps)
        self.stream = as_stream(rng)
        self.K = 0
        self.S = np.zeros(self.reps)
        self.live = np.ones(self.reps, dtype=bool)
        self._segment = 0

    def advance(self, K: int, *visitors) -> None:
        m = K - self.K
        if m <= 0:
            return
        seg = self.stream.child("segment", self._segment)
        self._segment += 1
        live_idx = np.flatnonzero(self.live)
        if live_idx.size:
            sizes = chunk_sizes(live_idx.size, m)
            off = 0
            for c, size in enumerate(sizes):
                idx = live_idx[off : off + size]
                off += size
                g = seg.child(c).generator()
                s = np.cumsum(dist.sample(self.law, g, (size, m)), axis=1)
                s += self.S[idx, None]
                side = s < 0 if self.kind == "U" else s >= 0
                live = np.logical_and.accumulate(side, axis=1)
                for v in visitors:
                    v(idx, live, s, self.K)
                self.S[idx] = s[:, -1]
                self.live[idx] = live[:, -1]
        self.K = K


def _batch_of(reps: int, batches: int) -> np.ndarray:
    return (np.arange(reps) * batches) // reps


def _decade_fraction(terms: np.ndarray, total: float) -> float:
    K = len(terms)
    lo = K // 10
    return float(terms[lo:].sum()) / total if total > 0 else 0.0


def _estimate_ladder(kind, law, grid, K, reps, rng, batches, auto) -> RenewalEstimate:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be nondecreasing")
    stream = as_stream(rng)
    nonneg = grid >= 0
    g = grid[nonneg]
    G = g.size
    B = max(2, min(batches, reps))
    batch_of = _batch_of(reps, B)
    counts = np.zeros((B, G + 1))
    terms: list[np.ndarray] = []
    surv: list[np.ndarray] = []
    top = g[-1] if G else 0.0

    def visit(idx, live, s, k0):
        if kind == "U":
            vals = -s  # counted at x >= -S_k
            bins = np.searchsorted(g, vals, side="left")
            hit_top = live & (vals <= top)
        else:
            vals = s  # counted at z > S_k
            bins = np.searchsorted(g, vals, side="right")
            hit_top = live & (vals < top)
        b = np.broadcast_to(batch_of[idx, None], s.shape)
        flat = (b * (G + 1) + bins)[live]
        counts[:] += np.bincount(flat, minlength=B * (G + 1)).reshape(B, G + 1)
        terms[-1][:] += hit_top.sum(axis=0)
        surv[-1][:] += live.sum(axis=0)

    ens = LadderEnsemble(law, kind, reps, stream)
    K_target = int(K) if K is not None else DEFAULT_K
    while True:
        m = K_target - ens.K
        terms.append(np.zeros(m))
        surv.append(np.zeros(m))
        ens.advance(K_target, visit)
        all_terms = np.concatenate(terms) / reps
        total = 1.0 + float(all_terms.sum())
        if not auto or _decade_fraction(all_terms, total) < TRUNCATION_TOL or K_target >= MAX_K:
            break
        K_target *= 2

    sizes = np.bincount(batch_of, minlength=B).astype(float)
    cum = np.cumsum(counts[:, :G], axis=1)
    batch_vals = 1.0 + cum / sizes[:, None]
    vals = 1.0 + cum.sum(axis=0) / reps
    se = batch_vals.std(axis=0, ddof=1) / math.sqrt(B)

    full_vals = np.zeros(grid.size)
    full_se = np.zeros(grid.size)
    full_batches = np.zeros((B, grid.size))
    full_vals[nonneg] = vals
    full_se[nonneg] = se
    full_batches[:, nonneg] = batch_vals
    return RenewalEstimate(
        kind, grid, full_vals, full_se, full_batches, ens.K, reps, stream.seed,
        all_terms, np.concatenate(surv) / reps,
    )


def estimate_U(law: StepLaw, x_grid, K: int | None = None, reps: int = 100_000, rng=0,
               batches: int = N_BATCHES, auto: bool | None = None) -> RenewalEstimate:
    """``U(x) = 1 + sum_k P(-S_k <= x, M_k < 0)`` on ``x_grid`` (0 for ``x < 0``).

    ``K=None`` starts at 200 and doubles until the last decade of terms
    ``k in (K/10, K]`` at the largest grid point sums to less than 1e-3 of
    the total.  An explicit ``K`` is used as given unless ``auto=True``.
    """
    auto = K is None if auto is None else auto
    return _estimate_ladder("U", law, x_grid, K, reps, rng, batches, auto)


def estimate_V(law: StepLaw, z_grid, K: int | None = None, reps: int = 100_000, rng=0,
               batches: int = N_BATCHES, auto: bool | None = None) -> RenewalEstimate:
    """``V(-z) = 1 + sum_k P(S_k < z, L_k >= 0)`` on ``z_grid`` (0 for ``z < 0``)."""
    auto = K is None if auto is None else auto
    return _estimate_ladder("V", law, z_grid, K, reps, rng, batches, auto)


def tabulate(law: StepLaw, grid, K: int | None = None, reps: int = 100_000, rng=0,
             batches: int = N_BATCHES) -> RenewalTable:
    stream = as_stream(rng)
    U = estimate_U(law, grid, K, reps, stream.child("U"), batches)
    V = estimate_V(law, grid, K, reps, stream.child("V"), batches)
    return RenewalTable(law, np.asarray(grid, dtype=float), U, V, stream.seed)


def estimate_D(law: StepLaw, K: int | None = None, reps: int = 100_000, rng=0,
               auto: bool | None = None) -> SeriesEstimate:
    """``D = sum_k P(S_k >= 0) / k``.

    Each probability uses the exchangeable-maximum identity
    ``P(S_k >= 0) = k E[A(max(X_(k-1), -S_{k-1}))]`` where ``X_(k-1)`` is the
    largest of the first ``k - 1`` steps.  It is exact for ``k = 1`` and keeps
    bounded relative error where the single-big-jump term dominates.
    """
    auto = K is None if auto is None else auto
    stream = as_stream(rng)
    S = np.zeros(reps)
    top = np.full(reps, -np.inf)
    per_path = np.zeros(reps)
    terms: list[np.ndarray] = []
    K_done, K_target, segment = 0, int(K) if K is not None else DEFAULT_K, 0
    while True:
        m = K_target - K_done
        seg = stream.child("segment", segment)
        segment += 1
        acc = np.zeros(m)
        off = 0
        for c, size in enumerate(chunk_sizes(reps, m)):
            g = seg.child(c).generator()
            steps = dist.sample(law, g, (size, m))
            sl = slice(off, off + size)
            s = np.cumsum(steps, axis=1) + S[sl, None]
            prev = np.concatenate([S[sl, None], s[:, :-1]], axis=1)
            mx = np.maximum.accumulate(steps, axis=1)
            prev_top = np.concatenate([top[sl, None], np.maximum(mx[:, :-1], top[sl, None])], axis=1)
            # k * A(.) / k
            p = law.tail(np.maximum(prev_top, -prev))
            acc += p.sum(axis=0)
            per_path[sl] += p.sum(axis=1)
            S[sl] = s[:, -1]
            top[sl] = np.maximum(top[sl], mx[:, -1])
            off += size
        terms.append(acc / reps)
        K_done = K_target
        all_terms = np.concatenate(terms)
        value = float(all_terms.sum())
        if not auto or _decade_fraction(all_terms, value) < TRUNCATION_TOL or K_target >= MAX_K:
            break
        K_target *= 2
    tail, p = power_tail(all_terms)
    se = float(per_path.std(ddof=1) / math.sqrt(reps))
    return SeriesEstimate(value, all_terms, K_done, tail, se, p)


def _affine_tail(grid: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares line through the last decade (10%) of grid points; returns weights
    ``(wl, ws)`` such that level-at-end = wl @ vals and slope = ws @ vals."""
    n = len(grid)
    lo = max(0, n - max(2, n // 10))
    x = grid[lo:]
    X = np.column_stack([np.ones_like(x), x - grid[-1]])
    pinv = np.linalg.pinv(X)
    wl = np.zeros(n)
    ws = np.zeros(n)
    wl[lo:] = pinv[0]
    ws[lo:] = pinv[1]
    return wl, ws


def laplace_weights(grid, lam: float, rel_tol: float = 1e-3, values=None) -> np.ndarray:
    """Weights ``w`` such that ``w @ f(grid)`` approximates ``int_0^inf e^{-lam t} f(t) dt``.

    Trapezoid on the grid plus the closed-form integral of ``e^{-lam t}``
    times the affine extrapolation of ``f`` beyond the last grid point.
    If ``values`` is given, a grid too short for ``lam`` (tail completion
    above ``rel_tol`` of the total) raises ``ValueError`` naming the extent
    needed.
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("Laplace quadrature needs an increasing grid starting at 0")
    e = np.exp(-lam * grid)
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h * e[:-1]
    w[1:] += 0.5 * h * e[1:]
    wl, ws = _affine_tail(grid, np.zeros_like(grid))
    X = grid[-1]
    eX = math.exp(-lam * X)
    wt = eX * (wl / lam + ws / lam**2)
    if values is not None:
        values = np.asarray(values, dtype=float)
        total = float((w + wt) @ values)
        tail = float(wt @ values)
        if abs(tail) > rel_tol * abs(total):
            level, slope = float(wl @ values), float(ws @ values)
            need = X
            while math.exp(-lam * need) * ((level + slope * (need - X)) / lam + slope / lam**2) > rel_tol * total:
                need += max(h[-1], 0.05 * need)
            raise ValueError(
                f"grid ends at {X:g}; lambda={lam:g} needs the grid to extend to about {need:.3g}"
            )
    return w + wt


def laplace_K(law: StepLaw, lam, table: RenewalTable, K: int | None = None, reps: int = 100_000,
              rng=0, rel_tol: float = 1e-3):
    """Both routes to ``K1(lam)`` and ``K2(lam)``.

    Integral route: quadrature of the tabulated ``U`` and ``V(-.)``.
    Series route: ``(1 + sum_k E[e^{lam S_k}; M_k < 0]) / lam`` and
    ``(1 + sum_k E[e^{-lam S_k}; L_k >= 0]) / lam`` from independent walks,
    truncated by the same doubling rule as the tables unless ``K`` is given.  ``lam`` may be a
    scalar or a sequence; a sequence returns a list.
    """
    scalar = np.ndim(lam) == 0
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lams <= 0):
        raise ValueError("lambda must be > 0")
    stream = as_stream(rng)
    grid = table.grid
    sel = grid >= 0
    g = grid[sel]

    integral = {}
    for which, est in ((1, table.U), (2, table.V)):
        vals = est.values[sel]
        bvals = est.batches[:, sel]
        out = []
        for lm in lams:
            w = laplace_weights(g, lm, rel_tol, vals)
            bi = bvals @ w
            out.append((float(w @ vals), float(bi.std(ddof=1) / math.sqrt(len(bi)))))
        integral[which] = out

    series = {}
    Ks = {}
    for which, kind, sign in ((1, "U", 1.0), (2, "V", -1.0)):
        acc = np.zeros((reps, lams.size))
        terms: list[np.ndarray] = []

        def visit(idx, live, s, k0, acc=acc, sign=sign, terms=terms):
            rows, cols = np.nonzero(live)
            e = np.exp(np.multiply.outer(sign * s[rows, cols], lams))
            for i in range(lams.size):
                acc[idx, i] += np.bincount(rows, weights=e[:, i], minlength=len(idx))
                terms[-1][i] += np.bincount(cols, weights=e[:, i], minlength=s.shape[1])

        ens = LadderEnsemble(law, kind, reps, stream.child("series", kind))
        K_target = int(K) if K is not None else DEFAULT_K
        while True:
            terms.append(np.zeros((lams.size, K_target - ens.K)))
            ens.advance(K_target, visit)
            t = np.concatenate(terms, axis=1) / reps
            frac = max(_decade_fraction(t[i], 1.0 + t[i].sum()) for i in range(lams.size))
            if K is not None or frac < TRUNCATION_TOL or K_target >= MAX_K:
                break
            K_target *= 2
        Ks[which] = ens.K
        mean = acc.mean(axis=0)
        se = acc.std(axis=0, ddof=1) / math.sqrt(reps)
        series[which] = [((1 + mean[i]) / lm, se[i] / lm) for i, lm in enumerate(lams)]

    res = []
    for i, lm in enumerate(lams):
        res.append(
            LaplaceCheck(
                float(lm),
                *integral[1][i], *series[1][i],
                *integral[2][i], *series[2][i],
                info={"K_U": table.U.K, "K_V": table.V.K, "K1_series_K": Ks[1], "K2_series_K": Ks[2],
                      "reps": reps, "seed": stream.seed},
            )
        )
    return res[0] if scalar else res


def default_grid(extent: float = 40.0, fine_step: float = 0.01, fine_until: float = 10.0,
                 coarse_step: float = 0.05) -> np.ndarray:
    """Nonuniform grid on ``[0, extent]``: fine near the origin where the
    Laplace integrands for large ``lambda`` concentrate, coarse beyond."""
    fine = np.arange(0.0, fine_until, fine_step)
    coarse = np.arange(fine_until, extent + 0.5 * coarse_step, coarse_step)
    return np.round(np.concatenate([fine, coarse]), 12)


def asymptotic_ratio_checks(law: StepLaw, n_list, x: float, lam: float, D: SeriesEstimate,
                            table: RenewalTable, reps: int = 200_000, rng=0, workers: int = 1,
                            laplace: LaplaceCheck | None = None) -> list:
    """Large-``n`` equivalences as ratios of an importance-sampled left side to a tabulated right side.

    Per ``n`` the records are, with ``K1, K2`` the integral-route Laplace values:

    - ``asl``:   ``P(L_n >= 0) / (e^D A(an))``
    - ``ratio``: ``(P(L_n >= -x) / P(L_n >= 0)) / U(x)``
    - ``ask2``:  ``E[e^{-lam S_n}; L_n >= 0] / (K2 b_n)``
    - ``ask1``:  ``E[e^{lam S_n}; M_n < 0] / (K1 b_n)``
    - ``h0``:    ``E_x[e^{-lam S_n}; L_n >= 0] / (b_n U(x) K2)``
    - ``h1``:    ``E_{-x}[e^{lam S_n}; M_n < 0] / (b_n V(-x) K1)``

    ``h0`` at ``x = 0`` is the same event and stream as ``ask2``.  The
    ``ratio`` error treats its two estimates as independent, which
    overstates it since they share paths.
    """
    from .rare.importance import default_config, is_expectation
    from .rare.theorem import make_record, point_weights

    if x < 0:
        raise ValueError("x must be >= 0")
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    stream = as_stream(rng)
    lc = laplace if laplace is not None else laplace_K(law, lam, table, reps=reps, rng=stream.child("laplace"))
    K1, K1se = lc.K1_integral, lc.K1_integral_stderr
    K2, K2se = lc.K2_integral, lc.K2_integral_stderr

    def at(est: RenewalEstimate, y: float):
        w = point_weights(est, y)
        b = est.batches @ w
        return float(w @ est.values), float(b.std(ddof=1) / math.sqrt(len(b)))

    Ux, Uxse = at(table.U, x)
    Vx, Vxse = at(table.V, x)
    eD = math.exp(D.value)
    out = []
    for n in n_list:
        b = dist.b_n(law, n).b_n
        s = stream.child("n", n)
        cfg0 = default_config(law, n, 0.0, rng=s.child("cfg0"))
        cfgx = cfg0 if x == 0 else default_config(law, n, x, rng=s.child("cfgx"))
        cfg_end = default_config(law, n, x, anchor="end", rng=s.child("cfg_end"))

        def run(func, cfg, key):
            return is_expectation(law, n, func, cfg, reps, s.child(key), workers)

        p0 = run(lambda st, sm: (sm.min(axis=1) >= 0).astype(float), cfg0, "L0")
        px = p0 if x == 0 else run(lambda st, sm: (sm.min(axis=1) >= -x).astype(float), cfgx, "Lx")
        k2 = run(lambda st, sm: np.where(sm.min(axis=1) >= 0, np.exp(-lam * sm[:, -1]), 0.0), cfg0, "L0exp")
        k1 = run(lambda st, sm: np.where(sm.max(axis=1) < 0, np.exp(lam * np.minimum(sm[:, -1], 0.0)), 0.0),
                 cfg_end, "M0exp")
        if x == 0:
            h0 = k2
        else:
            h0 = run(lambda st, sm: np.where(sm.min(axis=1) >= -x, np.exp(-lam * (x + sm[:, -1])), 0.0),
                     cfgx, "Lxexp")
        h1 = run(lambda st, sm: np.where(sm.max(axis=1) < x, np.exp(lam * np.minimum(sm[:, -1] - x, 0.0)), 0.0),
                 cfg_end, "Mxexp")

        A = float(law.tail(law.a * n))
        out.append(make_record("asl", n, p0, eD * A, eD * A * D.stderr, D=D.value))
        r, rse = ratio_with_stderr(px.value, px.stderr, p0.value, p0.stderr) if p0.value > 0 else (math.nan, 0.0)
        lhs = EstimatorResult(r, rse, reps, s.seed, min(px.ess or 0, p0.ess or 0),
                              tuple(sorted(set(px.flags) | set(p0.flags))))
        out.append(make_record("ratio", n, lhs, Ux, Uxse, x=x))
        out.append(make_record("ask2", n, k2, K2 * b, K2se * b, lam=lam))
        out.append(make_record("ask1", n, k1, K1 * b, K1se * b, lam=lam))
        out.append(make_record("h0", n, h0, b * Ux * K2, b * math.hypot(Uxse * K2, Ux * K2se), lam=lam, x=x))
        out.append(make_record("h1", n, h1, b * Vx * K1, b * math.hypot(Vxse * K1, Vx * K1se), lam=lam, x=x))
    return out
