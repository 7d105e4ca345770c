"""Run configuration shared by the CLI and the experiment scripts."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .addr import parse_cidr
from .estimators import DEFAULT_RHO
from .recorders import sentinel

WORKERS_ENV = "SUPERPOINT_WORKERS"

PRESETS = {
    # replicates the discrete-window experiment: one 300 s slice per window
    "discrete": dict(k=1, z=1, slice_seconds=300),
    "sliding": dict(k=300, z=16, slice_seconds=1),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    theta: int = 1024
    u: int = 4
    v: int = 65536
    g: int = 8
    g_prime: int = 1024
    z: int = 1
    k: int = 1
    rho: float = DEFAULT_RHO
    slice_seconds: int = 300
    t0: int | None = None
    seed: int = 0
    a_network: str = "10.0.0.0/8"
    workers: int = 1
    oracle_pair_limit: int = 100_000_000

    def validate(self) -> "RunConfig":
        try:
            if self.z < 1 or self.z > 16:
                raise ConfigError(f"z={self.z} outside [1, 16]")
            if not 1 <= self.k <= sentinel(self.z):
                raise ConfigError(f"k={self.k} must satisfy 1 <= k <= 2**z - 1 = {sentinel(self.z)}")
            if self.v < 1 or self.v & (self.v - 1):
                raise ConfigError(f"v={self.v} must be a power of two")
            if self.u < 1 or self.g < 1 or self.g_prime < 2 or self.theta < 1:
                raise ConfigError("u, g, theta must be >= 1 and g_prime >= 2")
            if not 0.0 < self.rho < 1.0:
                raise ConfigError("rho must lie in (0, 1)")
            if self.slice_seconds < 1:
                raise ConfigError("slice_seconds must be >= 1")
            if self.workers < 1:
                raise ConfigError("workers must be >= 1")
            if not 0 <= self.seed < 2**64:
                raise ConfigError("seed must fit in 64 bits")
            parse_cidr(self.a_network)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        preset = d.pop("preset", None)
        base = dict(PRESETS.get(preset, {})) if preset else {}
        if preset and preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base.update(d)
        return cls(**base)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)


def workers_from_env(default: int | None = None) -> int | None:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
