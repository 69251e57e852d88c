"""``key = value`` experiment configuration files."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

KINDS = ("tabulate-renewal", "check-theorem1", "decompose", "diagnose-jump", "laplace", "local-limit")


class ConfigError(ValueError):
    pass


def _int(s: str) -> int:
    return int(s.strip())


def _float(s: str) -> float:
    v = float(s.strip())
    if not math.isfinite(v):
        raise ValueError("not a finite number")
    return v


def _opt(parse):
    def f(s: str):
        s = s.strip()
        return None if s.lower() in ("", "none", "auto") else parse(s)

    return f


def _list(parse):
    def f(s: str):
        items = [t for t in s.split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(parse(t) for t in items)

    return f


def _str(s: str) -> str:
    return s.strip()


# key -> (parser, default)
SCHEMA = {
    "kind": (_str, "tabulate-renewal"),
    "beta": (_float, 3.0),
    "scale": (_float, 1.0),
    "a": (_float, 1.0),
    "n": (_list(_int), (100,)),
    "x": (_float, 5.0),
    "T": (_float, 0.0),
    "window": (_opt(_float), None),
    "side": (_str, "min"),
    "j": (_int, 1),
    "reps": (_int, 100_000),
    "K": (_opt(_int), None),
    "J_max": (_int, 20),
    "eps_def": (_float, 0.05),
    "horizon": (_opt(_int), None),
    "M": (_list(_float), (1.0, 2.0, 5.0, 10.0)),
    "delta": (_float, 0.125),
    "lambda": (_list(_float), (1.0,)),
    "grid_step": (_float, 0.05),
    "extent": (_float, 40.0),
    "x_list": (_list(_float), (16.0,)),
    "local_delta": (_float, 1.0),
    "seed": (_int, 0),
    "workers": (_int, 1),
    "out": (_opt(_str), None),
}

ALIASES = {"n_list": "n", "n-list": "n", "l": "window", "eps": "eps_def", "lam": "lambda"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "tabulate-renewal"
    beta: float = 3.0
    scale: float = 1.0
    a: float = 1.0
    n: tuple = (100,)
    x: float = 5.0
    T: float = 0.0
    window: float | None = None
    side: str = "min"
    j: int = 1
    reps: int = 100_000
    K: int | None = None
    J_max: int = 20
    eps_def: float = 0.05
    horizon: int | None = None
    M: tuple = (1.0, 2.0, 5.0, 10.0)
    delta: float = 0.125
    lam: tuple = (1.0,)
    grid_step: float = 0.05
    extent: float = 40.0
    x_list: tuple = (16.0,)
    local_delta: float = 1.0
    seed: int = 0
    workers: int = 1
    out: str | None = None

    def law(self):
        from ..dist import make_shifted_pareto

        return make_shifted_pareto(self.beta, self.scale, self.a)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d["lambda" if f.name == "lam" else f.name] = list(v) if isinstance(v, tuple) else v
        return d


def _field(key: str) -> str:
    return "lam" if key == "lambda" else key


def validate(cfg: ExperimentConfig) -> None:
    """Re-check every downstream domain constraint; raises ``ValueError``."""
    if cfg.kind not in KINDS:
        raise ValueError(f"kind must be one of {', '.join(KINDS)}")
    cfg.law()
    if any(n < 1 for n in cfg.n):
        raise ValueError("n must be >= 1")
    if list(cfg.n) != sorted(set(cfg.n)):
        raise ValueError("n list must be strictly increasing")
    if cfg.x < 0:
        raise ValueError("x must be >= 0")
    if cfg.side not in ("min", "max"):
        raise ValueError("side must be min or max")
    if cfg.side == "min" and cfg.window is None and not cfg.T > -cfg.x:
        raise ValueError("need T > -x")
    if cfg.side == "max" and not cfg.T < cfg.x:
        raise ValueError("need T < x on the max side")
    if cfg.window is not None and cfg.side != "min":
        raise ValueError("window mode is defined for the min side only")
    if cfg.reps < 2:
        raise ValueError("reps must be >= 2")
    if cfg.K is not None and cfg.K < 1:
        raise ValueError("K must be >= 1")
    if cfg.J_max < 1:
        raise ValueError("J_max must be >= 1")
    if cfg.kind == "decompose" and cfg.J_max < 10:
        raise ValueError("decompose needs J_max >= 10")
    if not 0 < cfg.eps_def <= 1:
        raise ValueError("eps_def must lie in (0, 1]")
    if cfg.horizon is not None and cfg.horizon < 1:
        raise ValueError("horizon must be >= 1")
    if any(m <= 0 for m in cfg.M):
        raise ValueError("M must be > 0")
    if not 0 < cfg.delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    if any(v <= 0 for v in cfg.lam):
        raise ValueError("lambda must be > 0")
    if cfg.grid_step <= 0 or cfg.extent <= 0 or cfg.local_delta <= 0:
        raise ValueError("grid_step, extent and local_delta must be > 0")
    if not 1 <= cfg.j <= min(cfg.n):
        raise ValueError("need 1 <= j <= n")
    if cfg.kind == "local-limit":
        for n in cfg.n:
            if min(cfg.x_list) < n ** (2 / 3) - 1e-9:
                raise ValueError(f"x_list entries must be >= n^(2/3) = {n ** (2 / 3):.6g}")
    if not 0 <= cfg.seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        raise ValueError("workers must be >= 1")


def parse_value(key: str, text: str):
    canon = ALIASES.get(key, key)
    if canon not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    parse, _ = SCHEMA[canon]
    try:
        return canon, parse(text)
    except ValueError as e:
        raise ConfigError(f"bad value for {key!r}: {text.strip()!r} ({e})") from None


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); ``overrides`` are applied last.

    Errors carry the offending line number.
    """
    vals: dict = {}
    lines: dict = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            canon, v = parse_value(key, value)
        except ConfigError as e:
            raise ConfigError(f"line {no}: {e}") from None
        if canon in vals:
            raise ConfigError(f"line {no}: duplicate key {key!r} (first on line {lines[canon]})")
        vals[canon], lines[canon] = v, no
    for key, value in (overrides or {}).items():
        canon, v = parse_value(key, value) if isinstance(value, str) else (ALIASES.get(key, key), value)
        vals[canon] = v
        lines[canon] = None
    cfg = ExperimentConfig(**{_field(k): v for k, v in vals.items()})
    try:
        validate(cfg)
    except ValueError as e:
        where = _blame(str(e), lines)
        raise ConfigError(f"{where}{e}") from None
    return cfg


def _blame(msg: str, lines: dict) -> str:
    for key, no in lines.items():
        if no is not None and (f"{key} " in msg or msg.startswith(key)):
            return f"line {no}: "
    return ""


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(_fmt(t) for t in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = []
    for f in fields(cfg):
        key = "lambda" if f.name == "lam" else f.name
        out.append(f"{key} = {_fmt(getattr(cfg, f.name))}")
    return "\n".join(out) + "\n"
