"""Flat ``key = value`` run configuration with a typed schema per experiment.

Lines are ``key = value``; ``#`` starts a comment; sequences are comma
separated.  The reserved keys ``experiment``, ``seed``, ``format``, ``out``,
``threads`` and ``phase_guard_bits`` configure the run itself; every other
key must appear in the experiment's schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError

FORMATS = ("csv", "json")
RESERVED = ("experiment", "seed", "format", "out", "threads", "phase_guard_bits")
SEED_MAX = (1 << 64) - 1


@dataclass(frozen=True)
class Param:
    """One schema entry: a converter name and a default (``None`` = required)."""

    kind: str
    default: object = None
    doc: str = ""


def _number(text, cast, key):
    try:
        if cast is int:
            # accept 1e6-style integers written in scientific notation
            value = float(text) if any(c in text for c in ".eE") else int(text)
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError
                value = int(value)
            return value
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {cast.__name__}") from None


def convert(kind, text, key):
    text = text.strip()
    if kind == "int":
        return _number(text, int, key)
    if kind == "float":
        return _number(text, float, key)
    if kind == "str":
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: cannot parse {text!r} as a boolean")
    if kind in ("ints", "floats"):
        items = [s for s in (x.strip() for x in text.split(",")) if s]
        if not items:
            raise ConfigError(f"{key}: empty sequence")
        cast = int if kind == "ints" else float
        return tuple(_number(s, cast, key) for s in items)
    raise ConfigError(f"{key}: unknown schema type {kind!r}")


def parse_text(text):
    """Raw ``{key: value-string}`` from config text; duplicate keys are rejected."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None
    format: str = "json"
    threads: int = 1
    phase_guard_bits: int = 64

    def __post_init__(self):
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.phase_guard_bits < 0:
            raise ConfigError("phase_guard_bits must be >= 0")

    def echo(self):
        """Plain-data copy of the full configuration for reports."""
        return {
            "experiment": self.experiment,
            "parameters": {k: list(v) if isinstance(v, tuple) else v for k, v in self.parameters.items()},
            "seed": self.seed,
            "format": self.format,
            "threads": self.threads,
            "phase_guard_bits": self.phase_guard_bits,
        }


def build_config(experiment, schema, raw, **overrides):
    """Validate raw strings against ``schema`` and fill defaults.

    ``overrides`` (from the command line) win over file values; ``None``
    entries are ignored.
    """
    raw = dict(raw)
    named = raw.pop("experiment", None)
    if named is not None and named != experiment:
        raise ConfigError(f"config is for experiment {named!r}, not {experiment!r}")
    run = {
        "seed": convert("int", raw.pop("seed"), "seed") if "seed" in raw else 0,
        "format": raw.pop("format", "json"),
        "output_path": raw.pop("out", None),
        "threads": convert("int", raw.pop("threads"), "threads") if "threads" in raw else 1,
        "phase_guard_bits": (
            convert("int", raw.pop("phase_guard_bits"), "phase_guard_bits") if "phase_guard_bits" in raw else 64
        ),
    }
    for key, value in overrides.items():
        if value is not None:
            run[key] = value
    params = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown parameter {key!r} for experiment {experiment!r}")
        params[key] = convert(schema[key].kind, value, key)
    for key, p in schema.items():
        if key not in params:
            if p.default is None:
                raise ConfigError(f"missing required parameter {key!r} for experiment {experiment!r}")
            params[key] = p.default
    return RunConfig(experiment, params, **run)


def load_config(path, experiment, schema, **overrides):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(experiment, schema, parse_text(text), **overrides)
