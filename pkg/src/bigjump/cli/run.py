"""Experiment runner and command-line entry point."""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import renewal
from ..rare import decomposition as dc
from ..rare import importance, theorem
from ..streams import Stream
from .config import SCHEMA, ConfigError, ExperimentConfig, parse_config, serialize_config
from .plot import Series, emit_plot

OUT_ENV = "BIGJUMP_OUT"
EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


@dataclass
class RunRecord:
    config: dict
    build: str
    duration: float
    workers: int
    exit_code: int
    files: list = field(default_factory=list)
    results: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "build": self.build, "duration_seconds": self.duration,
                "workers": self.workers, "exit_code": self.exit_code, "files": self.files,
                "n_results": len(self.results)}


def build_id() -> str:
    try:
        from importlib.metadata import version

        ver = version("artifact")
    except Exception:
        ver = "0+unknown"
    try:
        here = Path(__file__).resolve().parent
        r = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True,
                           text=True, timeout=5)
        if r.returncode == 0 and r.stdout.strip():
            return f"{ver}+g{r.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return ver


def _dumps(rec: dict) -> str:
    return json.dumps(_clean(rec), sort_keys=True, allow_nan=True)


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                              for v in r))
    return "\n".join(lines) + "\n"


class _Writer:
    def __init__(self, out: Path, cfg: ExperimentConfig):
        self.out = out
        self.cfg = cfg
        self.files: list[str] = []
        self.records: list[dict] = []

    def record(self, rec: dict, event: dict | None = None):
        base = {"law": self.cfg.law().to_dict(), "seed": self.cfg.seed, "kind": self.cfg.kind}
        if event is not None:
            base["event"] = event
        merged = {**base, **rec}
        merged["flags"] = list(rec.get("flags", []))
        self.records.append(merged)

    def text(self, name: str, content: str):
        (self.out / name).write_bytes(content.encode("utf-8"))
        self.files.append(name)

    def plot(self, name: str, series, kind: str, title: str, scale: float = 1.0):
        emit_plot(series, kind, self.out / name, title, scale)
        self.files.append(name)


def _event(cfg: ExperimentConfig, n: int) -> importance.EventSpec:
    return importance.EventSpec(n, cfg.x, cfg.T, cfg.window, cfg.side)


def _table(cfg: ExperimentConfig, law, stream: Stream, extent: float):
    grid = renewal.default_grid(extent=extent)
    return renewal.tabulate(law, grid, cfg.K, cfg.reps, stream.child("table"))


def _isconf(cfg: ExperimentConfig, law, n: int, level: float, stream: Stream, anchor: str = "start"):
    return importance.default_config(law, n, level, J_max=cfg.J_max, eps=cfg.eps_def, anchor=anchor,
                                     rng=stream.child("config", n))


def _run_tabulate(cfg, law, stream, w: _Writer):
    table = _table(cfg, law, stream, cfg.extent)
    w.text("renewal.csv", table.to_csv())
    D = renewal.estimate_D(law, cfg.K, cfg.reps, stream.child("D"))
    for est in (table.U, table.V):
        w.record({"experiment": "renewal_" + est.kind, "K": est.K, "reps": est.reps,
                  "grid_points": int(est.grid.size), "value_at_end": float(est.values[-1]),
                  "stderr_at_end": float(est.stderr[-1])})
    w.record({"experiment": "D", "value": D.value, "stderr": D.stderr, "K": D.K, "tail_bound": D.tail_bound,
              "tail_exponent": D.tail_exponent, "exp_D": float(np.exp(D.value))})
    w.plot("renewal.svg", [Series.of("U(x)", table.grid, table.U.values),
                           Series.of("V(-z)", table.grid, table.V.values)], "line", "renewal functions")


def _run_theorem1(cfg, law, stream, w: _Writer):
    need = cfg.x + cfg.T if cfg.side == "min" else cfg.x - cfg.T
    if cfg.window is not None:
        need = cfg.x + cfg.window + 1
    table = _table(cfg, law, stream, max(cfg.extent, need, cfg.x))
    rows = []
    for n in cfg.n:
        ev = _event(cfg, n)
        level = ev.x if ev.side == "min" else ev.x - ev.T
        c = _isconf(cfg, law, n, level, stream, "start" if ev.side == "min" else "end")
        (rec,) = theorem.theorem1_check(law, ev, table, c, cfg.reps, stream.child("theorem1"), [n], cfg.workers)
        w.record(rec.to_dict(), ev.to_dict())
        rows.append((n, rec.lhs, rec.lhs_stderr, rec.rhs, rec.rhs_stderr, rec.ratio, rec.ratio_stderr))
    w.text("theorem1.csv", _csv(["n", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "ratio", "ratio_stderr"], rows))
    w.plot("ratio_vs_n.svg", [Series.of("LHS/RHS", [r[0] for r in rows], [r[5] for r in rows])], "line",
           "ratio vs n")


def _weighted_resample(values, weights, size: int) -> np.ndarray:
    """Systematic resampling with a fixed offset (deterministic)."""
    order = np.argsort(values, kind="stable")
    v, c = np.asarray(values)[order], np.cumsum(np.asarray(weights)[order])
    u = (np.arange(size) + 0.5) / size * c[-1]
    return v[np.minimum(np.searchsorted(c, u), v.size - 1)]


def _run_decompose(cfg, law, stream, w: _Writer):
    theory = dc.pi_theoretical(law, cfg.x, rng=stream.child("pi-theory"), workers=cfg.workers)
    mt = dc.mu_theta(law, cfg.x, cfg.T, cfg.grid_step, cfg.horizon, min(cfg.reps, 200_000), stream.child("mu"),
                     cfg.workers)
    w.record({"experiment": "mu_theta", **mt.to_dict()})
    w.text("mu.csv", _csv(["y", "survival", "survival_stderr", "density"],
                          zip(mt.grid.tolist(), mt.survival.tolist(), mt.survival_stderr.tolist(),
                              mt.density.tolist())))
    probes = dc.default_probes()
    for n in cfg.n:
        ev = importance.EventSpec(n, cfg.x, cfg.T)
        J = max(cfg.J_max, theory.J_max, 10)
        c = importance.default_config(law, n, cfg.x, J_max=J, eps=cfg.eps_def, rng=stream.child("config", n))
        sample = dc.collect(law, ev, c, cfg.reps, stream.child("sample", n), cfg.workers, probes, cfg.j)
        pi = dc.pi_distribution(law, cfg.x, cfg.T, n, c, sample=sample, theory=theory)
        ks = dc.jump_size_test(law, cfg.x, cfg.T, n, sample=sample)
        dec = dc.decomposition_test(law, cfg.x, cfg.T, n, cfg.j, probes, horizon=mt.horizon if cfg.horizon is None
                                    else cfg.horizon, rng=stream.child("factors", n), sample=sample,
                                    factor_reps=min(cfg.reps, 200_000), workers=cfg.workers)
        for rep in (pi, ks, dec):
            for r in rep.records():
                w.record(r, ev.to_dict())
        J_show = len(pi.pi_theoretical)
        w.text(f"pi_n{n}.csv", _csv(["j", "pi_empirical", "pi_empirical_stderr", "pi_theoretical"],
                                    zip(range(1, J_show + 1), pi.pi_empirical[:J_show].tolist(),
                                        pi.pi_empirical_stderr[:J_show].tolist(), pi.pi_theoretical.tolist())))
        js = np.arange(1, J_show + 1)
        w.plot(f"pi_n{n}.svg", [Series.of("empirical", js, pi.pi_empirical[:J_show]),
                                Series.of("theoretical", js, pi.pi_theoretical)], "bar", f"jump time, n={n}")
        z, wt = dc.jump_size_values(sample)
        if z.size:
            rs = _weighted_resample(z, wt, min(2000, z.size))
            w.plot(f"jump_qq_n{n}.svg", [Series.of("(X_k - an)/sqrt(n)", np.arange(rs.size), rs)], "qq",
                   f"jump size QQ, n={n}", scale=float(np.sqrt(law.sigma2)))


def _run_diagnose(cfg, law, stream, w: _Writer):
    rows = []
    for n in cfg.n:
        ev = _event(cfg, n)
        if ev.side != "min":
            raise ValueError("diagnose-jump uses the min-side event")
        c = _isconf(cfg, law, n, cfg.x, stream)
        rep = dc.single_jump_diagnostics(law, ev, cfg.M, cfg.delta, c, cfg.reps, stream.child("diag", n),
                                         workers=cfg.workers)
        for r in rep.records():
            w.record(r, ev.to_dict())
        d = rep.diagnostics
        rows.append((n, "no_big_step", "", d["no_big_step"]["conditional"], d["no_big_step"]["over_b_n"]))
        rows.append((n, "second_big_step", "", d["second_big_step"]["conditional"],
                     d["second_big_step"]["over_b_n"]))
        for m, v in d["max_step_outside"].items():
            rows.append((n, "max_step_outside", m, v["conditional"], v["over_b_n"]))
        for J, v in d["max_step_after"].items():
            rows.append((n, "max_step_after", J, v["conditional"], v["over_b_n"]))
    w.text("diagnostics.csv", _csv(["n", "event", "parameter", "conditional", "over_b_n"], rows))


def _run_laplace(cfg, law, stream, w: _Writer):
    table = _table(cfg, law, stream, cfg.extent)
    checks = renewal.laplace_K(law, list(cfg.lam), table, cfg.K, cfg.reps, stream.child("series"))
    rows = []
    for lc in checks:
        d = lc.to_dict()
        d.update({"experiment": "laplace", "z_K1": lc.z_score(1), "z_K2": lc.z_score(2)})
        w.record(d)
        rows.append((lc.lam, lc.K1_integral, lc.K1_integral_stderr, lc.K1_series, lc.K1_series_stderr,
                     lc.K2_integral, lc.K2_integral_stderr, lc.K2_series, lc.K2_series_stderr))
    w.text("laplace.csv", _csv(["lambda", "K1_integral", "K1_integral_stderr", "K1_series", "K1_series_stderr",
                                "K2_integral", "K2_integral_stderr", "K2_series", "K2_series_stderr"], rows))
    w.plot("laplace.svg", [Series.of("K1 integral", cfg.lam, [r[1] for r in rows]),
                           Series.of("K1 series", cfg.lam, [r[3] for r in rows]),
                           Series.of("K2 integral", cfg.lam, [r[5] for r in rows]),
                           Series.of("K2 series", cfg.lam, [r[7] for r in rows])], "line", "Laplace routes")


def _run_local(cfg, law, stream, w: _Writer):
    rows = []
    for n in cfg.n:
        recs = theorem.local_limit_check(law, n, cfg.x_list, cfg.local_delta, cfg.reps, stream.child("local", n),
                                         cfg.workers)
        for r in recs:
            w.record(r.to_dict())
            rows.append((n, r.info["x"], r.lhs, r.lhs_stderr, r.rhs, r.ratio, r.ratio_stderr))
    w.text("local_limit.csv", _csv(["n", "x", "empirical", "empirical_stderr", "formula", "ratio", "ratio_stderr"],
                                   rows))


DISPATCH = {
    "tabulate-renewal": _run_tabulate,
    "check-theorem1": _run_theorem1,
    "decompose": _run_decompose,
    "diagnose-jump": _run_diagnose,
    "laplace": _run_laplace,
    "local-limit": _run_local,
}


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out or os.environ.get(OUT_ENV) or "bigjump-out")


def run(cfg: ExperimentConfig) -> RunRecord:
    """Execute one experiment and write its files.

    ``results.jsonl`` and the CSV/SVG companions depend only on the
    configuration; timing and build data go to ``run.json``.
    """
    t0 = time.perf_counter()
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    law = cfg.law()
    w = _Writer(out, cfg)
    DISPATCH[cfg.kind](cfg, law, Stream(cfg.seed).child(cfg.kind), w)
    w.text("results.jsonl", "".join(_dumps(r) + "\n" for r in w.records))
    w.text("config.txt", serialize_config(cfg))
    flagged = any(r.get("flags") for r in w.records)
    rec = RunRecord(cfg.to_dict(), build_id(), time.perf_counter() - t0, cfg.workers,
                    EXIT_FLAGGED if flagged else EXIT_OK, list(w.files) + ["run.json"], w.records)
    (out / "run.json").write_text(json.dumps(rec.to_dict(), sort_keys=True, indent=1) + "\n")
    return rec


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bigjump", description="Heavy-tailed random walk experiments.")
    p.add_argument("config", nargs="?", help="key = value configuration file")
    for key in SCHEMA:
        p.add_argument(f"--{key}", dest=f"opt_{key}", metavar="VALUE", help=f"override '{key}'")
    p.add_argument("--n-list", dest="opt_n_list", metavar="VALUE", help="alias of --n")
    p.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_") and v is not None}
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError, UnicodeDecodeError) as e:
        print(f"bigjump: config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.print_config:
        sys.stdout.write(serialize_config(cfg))
        return EXIT_OK
    try:
        rec = run(cfg)
    except (ValueError, OSError) as e:
        print(f"bigjump: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    flags = sorted({f for r in rec.results for f in r.get("flags", [])})
    print(f"bigjump: {cfg.kind}: {len(rec.results)} records in {output_dir(cfg)}"
          + (f" (flags: {', '.join(flags)})" if flags else ""))
    return rec.exit_code


if __name__ == "__main__":
    sys.exit(main())
