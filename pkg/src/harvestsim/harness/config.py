"""Run configuration: a flat key = value text format with typed fields."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from ..simnet import Topology
from .topology import (LOSSY21_CURVE, MAX_NODES, DistanceDecay, Lossless, QualityFn, from_positions,
                       gen_grid, grid_for, lossy21, read_positions, two_arm_line)

PROTOCOLS = ("harvest", "straw")
LOSS_MODELS = ("lossless", "distance-decay", "lossy21")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """One simulation run.

    ``topology`` is one of
      ``grid``         near-square grid holding n senders plus the base at a corner
      ``grid:RxC``     R rows by C columns, optionally ``grid:RxC@r,c`` for the base cell
      ``line``         base in the middle of a straight line, n/2 nodes per side
      ``lossy21``      the 21-node lossy reconstruction
      ``file:PATH``    explicit ``x y`` positions, base first
    """
    protocol: str = "harvest"
    topology: str = "grid"
    n: int = 20
    packets: int = 100
    slot_ms: int = 31
    airtime_ms: int = 23
    colors: int = 4
    concurrency: int = 2
    buffers: int = 1
    seed: int = 1
    loss_model: str = "lossless"
    spacing_ft: float = 3.0
    range_ft: float = 3.0
    retry_cap: int = 5
    soft_ttl_periods: int = 3
    duty_cycle: bool = True
    timeout_periods: int = 10_000

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.loss_model not in LOSS_MODELS:
            raise ConfigError(f"loss_model must be one of {LOSS_MODELS}, got {self.loss_model!r}")
        if self.colors < self.concurrency + 2:
            raise ConfigError("need colors >= concurrency + 2")
        if not 1 <= self.n <= MAX_NODES - 1:
            raise ConfigError(f"n must be in [1, {MAX_NODES - 1}]")
        for k in ("slot_ms", "airtime_ms", "spacing_ft", "range_ft", "soft_ttl_periods", "timeout_periods",
                  "buffers", "concurrency"):
            if getattr(self, k) <= 0:
                raise ConfigError(f"{k} must be positive")
        if self.airtime_ms > self.slot_ms:
            raise ConfigError("airtime_ms must fit inside slot_ms")
        if self.packets < 0 or self.retry_cap < 0:
            raise ConfigError("packets and retry_cap must be non-negative")
        _parse_topology(self.topology)

    @property
    def period_ms(self) -> int:
        return self.colors * self.slot_ms

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **coerce_values(kw))

    def key(self) -> tuple:
        return tuple(str(getattr(self, f.name)) for f in fields(self))


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _cast(name: str, raw):
    if name not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    t = FIELD_TYPES[name]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if t in ("int", int):
            return int(raw)
        if t in ("float", float):
            return float(raw)
        if t in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def coerce_values(kv: dict) -> dict:
    return {k: _cast(k, v) for k, v in kv.items()}


def parse(text: str, base: RunConfig | None = None) -> RunConfig:
    """Read ``key = value`` lines; blank lines and '#' comments are ignored."""
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        kv[k.strip()] = v.strip()
    return replace(base or RunConfig(), **coerce_values(kv))


def render(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_show(getattr(cfg, f.name))}\n" for f in fields(cfg))


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def load(path) -> RunConfig:
    with open(path) as fh:
        return parse(fh.read())


# ---------------------------------------------------------------- topology

def _parse_topology(spec: str):
    if spec in ("grid", "line", "lossy21"):
        return spec, None
    if spec.startswith("file:"):
        return "file", spec[5:]
    if spec.startswith("grid:"):
        body, _, at = spec[5:].partition("@")
        try:
            rows, cols = (int(x) for x in body.lower().split("x"))
            base = tuple(int(x) for x in at.split(",")) if at else (0, 0)
        except ValueError:
            raise ConfigError(f"bad grid spec {spec!r}; expected grid:RxC or grid:RxC@r,c") from None
        if len(base) != 2:
            raise ConfigError(f"bad base cell in {spec!r}")
        return "grid_rc", (rows, cols, base)
    raise ConfigError(f"unknown topology {spec!r}")


def quality_fn(cfg: RunConfig) -> QualityFn:
    if cfg.loss_model == "lossless":
        return Lossless(cfg.range_ft)
    if cfg.loss_model == "distance-decay":
        return DistanceDecay()
    return LOSSY21_CURVE


def build_topology(cfg: RunConfig) -> Topology:
    kind, arg = _parse_topology(cfg.topology)
    q = quality_fn(cfg)
    if kind == "grid":
        return grid_for(cfg.n + 1, cfg.spacing_ft, q)
    if kind == "grid_rc":
        rows, cols, base = arg
        topo = gen_grid(rows, cols, cfg.spacing_ft, q, base_at=base)
    elif kind == "line":
        if cfg.n % 2:
            raise ConfigError("line topology needs an even n (n/2 nodes per side)")
        topo = two_arm_line(cfg.n // 2, cfg.spacing_ft, q)
    elif kind == "lossy21":
        topo = lossy21(None if cfg.loss_model == "lossy21" else q)
    else:
        topo = from_positions(read_positions(arg), q)
    if topo.n != cfg.n + 1:
        raise ConfigError(f"topology {cfg.topology!r} has {topo.n - 1} senders but n = {cfg.n}")
    return topo
