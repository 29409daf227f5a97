"""Experiment configuration read from INI files.

Every section and key is listed in ``SCHEMA``; anything else is an error.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .metric_core import ManifoldSpec

RESOLUTION_FACTORS = {"low": 0.5, "med": 1.0, "high": 2.0}

# key -> (parser, default); documented in the README
SCHEMA = {
    "manifold": {
        "kind": (str, "sphere"),
        "samples": (int, 10000),
        "seed": (int, 0),
        "R": (float, None),
        "r": (float, None),
        "eps": (float, None),
        "length": (float, None),
        "graph_factor": (float, None),
        "neck_ring": (float, None),
    },
    "sets": {
        "family": (str, "latitudes"),          # latitudes | equator | neck | none
        "colatitudes": ("floats", [0.3, 0.6, 0.9, 1.2, math.pi / 2]),
        "band_width": (float, None),           # default: sampling spacing
        "thickening": (float, 0.6),            # times the local graph scale of S
        "measure_scale": (float, 5.0),         # times the sampling spacing
    },
    "volume": {
        "radii": ("floats", [0.3, 0.6, 0.9, 1.2, math.pi / 2]),
        "centers": (int, 2),
        "bands": (int, 16),
        "measure_scale": (float, 3.0),         # times the spacing; regions have an edge bias ~ scale/r
    },
    "cover": {
        "epsilon": (float, None),              # default: max(diam / 32, 8 spacings)
        "doubling_trials": (int, 100),
        "max_dim": (int, 2),
    },
    "dumbbell": {
        "eps_list": ("floats", [0.2, 0.1, 0.05]),
        "samples": (int, 12000),
        "measure_scale": (float, 3.0),         # times the neck spacing
    },
    "run": {
        "threads": (int, 1),
        "out": (str, "isosep-out"),
        "resolution": (str, "med"),
    },
}


class ConfigError(ValueError):
    pass


def _parse(kind, text: str):
    if kind == "floats":
        return [_float(v) for v in text.replace(",", " ").split()]
    if kind is float:
        return _float(text)
    return kind(text)


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("pi", "π"):
        return math.pi
    if t.startswith("pi/"):
        return math.pi / float(t[3:])
    return float(t)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in self.values.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for k, v in keys.items():
                if k not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {k!r} in [{sec}]")
                full[sec][k] = v
        self.values = full
        self.validate()

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def validate(self) -> None:
        if self["run"]["resolution"] not in RESOLUTION_FACTORS:
            raise ConfigError("resolution must be one of low, med, high")
        if self["sets"]["family"] not in ("latitudes", "equator", "neck", "none"):
            raise ConfigError(f"unknown set family {self['sets']['family']!r}")
        for sec, key in (("volume", "radii"), ("dumbbell", "eps_list")):
            grid = self[sec][key]
            if not grid or any(not v > 0 for v in grid):
                raise ConfigError(f"[{sec}] {key} must be a nonempty list of positive values")
        if any(v > 0.5 for v in self["dumbbell"]["eps_list"]):
            raise ConfigError("dumbbell eps values must lie in (0, 0.5]")
        if self["run"]["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        self.manifold_spec().validate()

    @property
    def resolution_factor(self) -> float:
        return RESOLUTION_FACTORS[self["run"]["resolution"]]

    def manifold_spec(self, samples: int | None = None, **overrides) -> ManifoldSpec:
        m = self["manifold"]
        params = {k: m[k] for k in ("R", "r", "eps", "length", "graph_factor", "neck_ring")
                  if m[k] is not None}
        params.update(overrides)
        if samples is None:
            samples = max(1, int(round(m["samples"] * self.resolution_factor)))
        return ManifoldSpec(m["kind"], params, samples, m["seed"])

    def with_overrides(self, **sections) -> "ExperimentConfig":
        vals = {sec: dict(keys) for sec, keys in self.values.items()}
        for sec, keys in sections.items():
            vals.setdefault(sec, {}).update(keys)
        return ExperimentConfig(vals)

    def to_json(self) -> dict:
        return {sec: dict(sorted(keys.items())) for sec, keys in sorted(self.values.items())}


def load_config(path=None, text: str | None = None) -> ExperimentConfig:
    """Read an INI file (or string); missing keys take their defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh)
    elif text is not None:
        parser.read_string(text)
    values: dict = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        values[sec] = {}
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            kind = SCHEMA[sec][key][0]
            try:
                values[sec][key] = _parse(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r}") from exc
    return ExperimentConfig(values)
