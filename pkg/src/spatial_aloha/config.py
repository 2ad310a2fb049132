"""Experiment configuration: a flat ``key = value`` file plus overrides."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from spatial_aloha.errors import ConfigError, DomainError
from spatial_aloha.geometry import DIAMETER
from spatial_aloha.protocols import (
    EPS_FUNCTIONS,
    H_FUNCTIONS,
    ProtocolStateA1,
    ProtocolStateA2,
    ProtocolStateA3,
)
from spatial_aloha.traffic import ArrivalDistribution

PROTOCOLS = ("a1", "a2", "a3")

# Relative slack when a value typed as 0.5641895835 is meant to be the diameter.
_DIAMETER_RTOL = 1e-9


def parse_radius(text) -> float:
    if isinstance(text, str) and text.strip().lower() in ("2r", "diameter", "max"):
        return DIAMETER
    r = float(text)
    if abs(r - DIAMETER) <= DIAMETER * _DIAMETER_RTOL:
        return DIAMETER
    return r


def parse_arrival(text: str) -> ArrivalDistribution:
    """Parse ``poisson(5)``, ``bernoulli(0.2)``, ``deterministic(3)`` or ``pmf(0:0.8,1:0.2)``."""
    m = re.fullmatch(r"\s*([a-z\-]+)\s*\((.*)\)\s*", text)
    if not m:
        raise DomainError(f"cannot parse arrival law {text!r}")
    kind, body = m.group(1), m.group(2)
    if kind == "poisson":
        return ArrivalDistribution.poisson(float(body))
    if kind == "bernoulli":
        return ArrivalDistribution.bernoulli(float(body))
    if kind == "deterministic":
        return ArrivalDistribution.deterministic(int(body))
    if kind in ("pmf", "finite-pmf"):
        pairs = []
        for item in body.split(","):
            k, pr = item.split(":")
            pairs.append((int(k), float(pr)))
        return ArrivalDistribution.finite_pmf(pairs)
    raise DomainError(f"unknown arrival kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str = "a1"
    c: float = 1.0
    c1: float = 0.5
    c2: float = 2.0
    p1: float = 1.0
    C: float = 1.0
    K1: float = 1.0
    h: str = "half"
    eps: str = "inv_quarter"
    arrival: str = "poisson(1.0)"
    r: float = 0.2
    horizon: int = 100_000
    replications: int = 1
    seed: int = 1
    warmup_fraction: float = 0.2
    batches: int = 32
    initial_messages: int = 0
    bands: int = 128
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError("protocol", f"must be one of {PROTOCOLS}; got {self.protocol!r}")
        try:
            self.arrival_distribution()
        except (DomainError, ValueError) as exc:
            raise ConfigError("arrival", str(exc)) from None
        if not (0.0 <= self.r <= DIAMETER) or math.isnan(self.r):
            raise ConfigError("r", f"must lie in [0, 2R] = [0, {DIAMETER!r}]; got {self.r!r}")
        if self.horizon <= 0:
            raise ConfigError("horizon", f"must be positive; got {self.horizon!r}")
        if self.replications < 1:
            raise ConfigError("replications", f"must be at least 1; got {self.replications!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer; got {self.seed!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction", f"must lie in [0, 1); got {self.warmup_fraction!r}")
        if self.batches < 2:
            raise ConfigError("batches", f"must be at least 2; got {self.batches!r}")
        if self.initial_messages < 0:
            raise ConfigError("initial_messages", "must be non-negative")
        if self.bands < 1:
            raise ConfigError("bands", "must be at least 1")
        checks = {
            "c": lambda: ProtocolStateA1(self.c),
            "c1": lambda: ProtocolStateA2(self.c1, self.c2, self.p1),
            "C": lambda: ProtocolStateA3(self.C, self.K1, 0, self.h, self.eps),
        }
        names = {"a1": "c", "a2": "c1", "a3": "C"}
        try:
            checks[names[self.protocol]]()
        except DomainError as exc:
            raise ConfigError(names[self.protocol], str(exc)) from None
        if self.h not in H_FUNCTIONS:
            raise ConfigError("h", f"unknown function {self.h!r}")
        if self.eps not in EPS_FUNCTIONS:
            raise ConfigError("eps", f"unknown function {self.eps!r}")

    def arrival_distribution(self) -> ArrivalDistribution:
        return parse_arrival(self.arrival)

    @property
    def warmup_slots(self) -> int:
        return int(self.horizon * self.warmup_fraction)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def header_lines(self) -> list[str]:
        """The resolved configuration as ``# key=value`` comment lines."""
        return [f"# {k}={v!r}" if isinstance(v, float) else f"# {k}={v}" for k, v in self.items()]


_CASTS = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(key: str, value):
    if key not in _CASTS:
        raise ConfigError(key, "unknown configuration key")
    kind = _CASTS[key]
    if not isinstance(value, str):
        return value
    value = value.strip()
    try:
        if key == "r":
            return parse_radius(value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ConfigError(key, f"cannot parse {value!r} as {kind}") from None
    return value


def parse_pairs(pairs) -> dict:
    """Turn ``key=value`` strings into a typed override dict."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(pair, "expected key=value")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key == "lambda":
            out["arrival"] = f"poisson({float(value)!r})"
            continue
        out[key] = coerce(key, value)
    return out


def read_config_file(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pairs = []
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            pairs.append(line)
    return parse_pairs(pairs)


def build_config(path=None, overrides=None) -> ExperimentConfig:
    values = {}
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update({k: coerce(k, v) for k, v in overrides.items()})
    return ExperimentConfig(**values)
