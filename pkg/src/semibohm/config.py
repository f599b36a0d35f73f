"""Strict, nested dataclass schema for scenario configs (YAML on disk).

Every mapping key must name a field; anything else is rejected with its
dotted path and, when available, the line it came from. Range checks run
before any computation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml


class ConfigError(ValueError):
    def __init__(self, path: str, message: str, line: int | None = None):
        where = f"{path} (line {line})" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class WellConfig:
    kind: str = "harmonic"
    omega: float = 1.0
    coefficient: float = 1.0
    cubic: float = 0.1
    half_width: float | None = None
    csv: str | None = None

    def check(self, err):
        if self.kind not in ("harmonic", "quartic", "harmonic_cubic", "tabulated"):
            err("kind", f"unknown well kind {self.kind!r}")
        if self.kind == "tabulated" and not self.csv:
            err("csv", "tabulated well needs a csv path")
        if self.omega <= 0:
            err("omega", "must be positive")
        if self.coefficient <= 0:
            err("coefficient", "must be positive")
        if self.half_width is not None and self.half_width <= 0:
            err("half_width", "must be positive")


@dataclass(frozen=True)
class UnitsConfig:
    hbar: float = 1.0
    mass: float = 1.0

    def check(self, err):
        if self.hbar <= 0:
            err("hbar", "must be positive")
        if self.mass <= 0:
            err("mass", "must be positive")


@dataclass(frozen=True)
class SpecConfig:
    """n_bar, band and coefficients; ``coefficients`` ([re, im] pairs) overrides the preset."""

    center_level: int = 120
    band: int = 10
    preset: str = "gaussian_packet"
    sigma_r: float | None = None
    theta0: float | None = None
    x_center: float | None = 0.0
    direction: str = "right"
    coefficients: list[list[float]] | None = None

    def check(self, err):
        if self.center_level < 0:
            err("center_level", "must be non-negative")
        if self.band < 0 or self.band % 2:
            err("band", "must be a non-negative even integer")
        if self.band // 2 > self.center_level:
            err("band", "band reaches below the ground state")
        if self.preset not in ("gaussian_packet", "uniform_random_phase", "eigenstate"):
            err("preset", f"unknown preset {self.preset!r}")
        if self.sigma_r is not None and self.sigma_r <= 0:
            err("sigma_r", "must be positive")
        if self.direction not in ("right", "left"):
            err("direction", "must be right or left")
        if self.coefficients is not None:
            if len(self.coefficients) != self.band + 1:
                err("coefficients", f"expected {self.band + 1} entries, got {len(self.coefficients)}")
            for k, pair in enumerate(self.coefficients):
                if len(pair) != 2:
                    err(f"coefficients[{k}]", "each coefficient is a [re, im] pair")


@dataclass(frozen=True)
class LevelsConfig:
    levels: list[int] = field(default_factory=lambda: [20, 40, 60, 80, 100, 120])

    def check(self, err):
        if not self.levels:
            err("levels", "level list is empty")
        if any(n < 0 for n in self.levels):
            err("levels", "levels must be non-negative")
        if len(set(self.levels)) != len(self.levels):
            err("levels", "levels must be distinct")


@dataclass(frozen=True)
class FigRhoConfig:
    """Snapshot times are in units of the classical period T."""

    times: list[float] = field(default_factory=lambda: [0.0, 0.25])
    n_points: int = 2001

    def check(self, err):
        if not self.times:
            err("times", "time list is empty")
        if self.n_points < 10:
            err("n_points", "need at least 10 points")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Local-field trajectory; ``wavelengths`` is the run length in units of lambda0."""

    chi0: float = 0.01
    phi0: float = 0.0
    lambda0: float = 1.0
    v_cl: float = 1.0
    wavelengths: float = 1.0
    n_samples: int = 2001
    rtol: float = 1e-8

    def check(self, err):
        if self.chi0 == 0:
            err("chi0", "must be non-zero")
        if self.lambda0 <= 0:
            err("lambda0", "must be positive")
        if self.v_cl <= 0:
            err("v_cl", "must be positive")
        if self.wavelengths <= 0:
            err("wavelengths", "must be positive")
        if self.n_samples < 2:
            err("n_samples", "need at least 2 samples")
        if not 0 < self.rtol < 1e-2:
            err("rtol", "must lie in (0, 1e-2)")


@dataclass(frozen=True)
class HusimiConfig:
    """lambda values are given as multiples of lambda_minus at ``x`` (``lambda_units: minus``)
    or absolutely (``absolute``). ``t`` is in units of T."""

    t: float = 0.0
    x: float = 0.0
    lambdas: list[float] = field(default_factory=lambda: [0.02, 7.0, 5000.0])
    lambda_units: str = "minus"
    limit_lambdas: list[float] = field(default_factory=lambda: [0.5, 0.2, 0.05])
    x_points: int = 41
    p_points: int = 81
    window_points: int = 101
    normalization: bool = True

    def check(self, err):
        if not self.lambdas or any(v <= 0 for v in self.lambdas):
            err("lambdas", "need positive lambda values")
        if self.lambda_units not in ("minus", "absolute"):
            err("lambda_units", "must be minus or absolute")
        if any(v <= 0 for v in self.limit_lambdas) or any(np.diff(self.limit_lambdas) >= 0):
            err("limit_lambdas", "must be positive and strictly decreasing")
        for name in ("x_points", "p_points", "window_points"):
            if getattr(self, name) < 2:
                err(name, "need at least 2 points")


@dataclass(frozen=True)
class EquivarianceConfig:
    """Two-level ensemble; ``duration`` in units of T."""

    levels: list[int] = field(default_factory=lambda: [100, 101])
    count: int = 10000
    duration: float = 0.125
    samples: int = 3
    rtol: float = 1e-8
    cap_fraction: float = 0.025
    ks_limit: float = 0.02

    def check(self, err):
        if len(self.levels) < 2:
            err("levels", "need at least two levels")
        if self.count < 10:
            err("count", "need at least 10 trajectories")
        if self.duration <= 0:
            err("duration", "must be positive")
        if self.samples < 2:
            err("samples", "need at least 2 sample times")
        if not 0 < self.cap_fraction <= 1:
            err("cap_fraction", "must lie in (0, 1]")


@dataclass(frozen=True)
class PropertySuiteConfig:
    examples: int = 200
    continuity_points: int = 1000
    tolerance_norm: float = 1e-12

    def check(self, err):
        if self.examples < 1:
            err("examples", "must be positive")
        if self.continuity_points < 1:
            err("continuity_points", "must be positive")


@dataclass(frozen=True)
class AnalysisConfig:
    levels: LevelsConfig = field(default_factory=LevelsConfig)
    fig_rho: FigRhoConfig = field(default_factory=FigRhoConfig)
    fig_trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    husimi: HusimiConfig = field(default_factory=HusimiConfig)
    equivariance: EquivarianceConfig = field(default_factory=EquivarianceConfig)
    property_suite: PropertySuiteConfig = field(default_factory=PropertySuiteConfig)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    overwrite: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    oracle: bool = True
    well: WellConfig = field(default_factory=WellConfig)
    units: UnitsConfig = field(default_factory=UnitsConfig)
    spec: SpecConfig = field(default_factory=SpecConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def seeds(self) -> dict[str, int]:
        """Per-component seeds expanded from the top-level seed."""
        names = ("spec", "ensemble", "property_suite")
        children = np.random.SeedSequence(self.seed).spawn(len(names))
        return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


# ---------------------------------------------------------------------------
# loading


def _line_map(text: str) -> dict[str, int]:
    """Dotted key path -> 1-based line number of the key in the YAML source."""
    lines: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)

    walk(root, "")
    return lines


def _coerce(tp, value, path, err):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path, err)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path, err)
    if origin is list:
        if not isinstance(value, list):
            err(path, f"expected a list, got {type(value).__name__}")
        return [_coerce(args[0], v, f"{path}[{i}]", err) for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            err(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            err(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            err(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            err(path, "must be finite")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            err(path, f"expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported schema type {tp!r}")


def _build(cls, data, path, err):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        err(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            sub = f"{path}.{key}" if path else str(key)
            err(sub, f"unknown key (allowed: {', '.join(sorted(names))})")
    kwargs = {}
    for name in names:
        if name in data:
            sub = f"{path}.{name}" if path else name
            kwargs[name] = _coerce(hints[name], data[name], sub, err)
    obj = cls(**kwargs)
    check = getattr(obj, "check", None)
    if check is not None:
        check(lambda f, msg: err(f"{path}.{f}" if path else f, msg))
    return obj


def config_from_dict(data: dict, lines: dict[str, int] | None = None) -> ScenarioConfig:
    lines = lines or {}

    def err(path, message):
        key = path.split("[")[0]
        raise ConfigError(path, message, lines.get(key))

    return _build(ScenarioConfig, data, "", err)


def load_config(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"unparseable YAML: {exc}") from exc
    return config_from_dict(data or {}, _line_map(text))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
