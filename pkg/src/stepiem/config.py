"""Run configuration: TOML file parsing, overrides and lossless round-trips."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .potentials import Potential1D, linear_oscillator, quartic
from .step_system import StepConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    potential1: dict = field(default_factory=lambda: {"kind": "lo", "omega": 1.0})
    potential2: dict = field(default_factory=lambda: {"kind": "lo", "omega": 1.0})
    q1_wall: float = -0.5
    q2_wall: float = -0.5
    h: float = 1.0
    e1: Optional[float] = None
    theta2_0: float = 0.3
    n: int = 1000
    grid_size: int = 200
    h_min: Optional[float] = None
    h_max: Optional[float] = None
    h_count: int = 1
    eta: float = 1e-3
    kind: str = "chi2-integer"
    n_max: int = 7
    trajectory: bool = False
    seed: int = 0
    out: str = "out"
    workers: int = 0  # 0 = available parallelism
    quadrature_check: bool = False

    def validate(self) -> None:
        if self.q1_wall == 0.0 or self.q2_wall == 0.0:
            raise ConfigError(
                "wall positions must satisfy q1_wall * q2_wall != 0")
        if self.h <= 0.0:
            raise ConfigError("h must be positive")
        if self.e1 is not None and not 0.0 <= self.e1 <= self.h:
            raise ConfigError("e1 must lie in [0, h]")
        for key in ("potential1", "potential2"):
            spec = getattr(self, key)
            if not isinstance(spec, dict) or "kind" not in spec:
                raise ConfigError(f"{key} must be a table with a 'kind' entry")
            _build_potential(spec)  # raises on a bad spec

    def build_step_config(self) -> StepConfig:
        return StepConfig(
            pot1=_build_potential(self.potential1),
            pot2=_build_potential(self.potential2),
            q1_wall=self.q1_wall,
            q2_wall=self.q2_wall,
        )

    def to_toml(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            lines.append(f"{f.name} = {_toml_value(val)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        return cls.from_dict(tomllib.loads(text))

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_toml(Path(path).read_text())

    def asdict(self) -> dict:
        return asdict(self)


def _build_potential(spec: dict) -> Potential1D:
    kind = spec.get("kind")
    if kind == "lo":
        if "omega" not in spec:
            raise ConfigError("lo potential needs 'omega'")
        return linear_oscillator(float(spec["omega"]))
    if kind == "quartic":
        if "a" not in spec:
            raise ConfigError("quartic potential needs 'a'")
        return quartic(float(spec["a"]))
    raise ConfigError(f"unknown potential kind: {kind!r}")


def _toml_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, (int,)):
        return str(val)
    if isinstance(val, float):
        if not math.isfinite(val):
            raise ConfigError("non-finite floats are not representable in TOML")
        r = repr(val)
        # repr of a whole float is e.g. '1.0' so it already parses as float
        return r
    if isinstance(val, str):
        return '"' + val.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(val, dict):
        inner = ", ".join(f"{k} = {_toml_value(v)}" for k, v in val.items())
        return "{ " + inner + " }"
    raise ConfigError(f"cannot serialize config value {val!r}")


def parse_override(text: str):
    """Parse a --set key=value override; the value uses TOML syntax."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        val = tomllib.loads(f"x = {raw.strip()}")["x"]
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad override value {raw!r}: {exc}") from None
    return key, val
