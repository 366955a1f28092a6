"""Strict experiment configuration read from YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import yaml

from .errors import ConfigError, CuspflowError
from .geometry import ProfileSurface
from .mixing import KINDS, BumpFamily, EffectiveAverageConfig, RateModel
from .montecarlo import GAP_LAWS, AcceptanceWindow

SUITES = ("geometry", "excursion", "mixing", "montecarlo")
SUITE_CHOICES = SUITES + ("all",)


@dataclass(frozen=True)
class SurfaceConfig:
    r_values: tuple = (2.5, 3.0, 4.0)
    x_max: float = 1.0
    tol: float = 1e-10


@dataclass(frozen=True)
class GeometryConfig:
    n_random_excursions: int = 1000


@dataclass(frozen=True)
class ExcursionConfig:
    n_depth_samples: int = 40
    n_winding_samples: int = 25
    log_law_r: float = 3.0


@dataclass(frozen=True)
class MixingConfig:
    kind: str = "doubling"
    intermittency: float = 0.5
    variance_intermittency: tuple = (0.4, 2.0 / 3.0)
    variance_T_min: int = 100
    variance_T_max: int = 100_000
    variance_orbits: int = 400
    theta: float = 0.5
    alpha: float = 0.6
    m: float = 2.0
    xi: float = 0.2
    k_max: int = 21
    k0: int = 20
    sandwich_orbits: int = 200


@dataclass(frozen=True)
class MonteCarloConfig:
    T_max: float = 1e6
    n_trajectories: int = 100
    mu_gap: float = 1.0
    gap_law: str = "exponential"
    epsilon: float = 0.1
    c: float = 10.0
    t_min: float = 1e3


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str = "all"
    seed: int = 20240611
    workers: Union[int, str] = 1
    output_dir: str = "cuspflow-results"
    surface: SurfaceConfig = field(default_factory=SurfaceConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    excursion: ExcursionConfig = field(default_factory=ExcursionConfig)
    mixing: MixingConfig = field(default_factory=MixingConfig)
    montecarlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)

    def __post_init__(self):
        validate(self)

    @property
    def suites(self) -> tuple:
        return SUITES if self.suite == "all" else (self.suite,)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {"surface": SurfaceConfig, "geometry": GeometryConfig, "excursion": ExcursionConfig,
             "mixing": MixingConfig, "montecarlo": MonteCarloConfig}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(cls, name, value, path):
    default = next(f for f in dataclasses.fields(cls) if f.name == name)
    proto = default.default if default.default is not dataclasses.MISSING else None
    where = f"{path}.{name}" if path else name
    if isinstance(proto, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        return tuple(float(v) for v in value)
    if isinstance(proto, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(proto, int) and name != "workers":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(proto, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    return value


def _build(cls, data, path=""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or '<root>'}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is ExperimentConfig and key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = _coerce(cls, key, value, path)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (CuspflowError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def validate(cfg: ExperimentConfig) -> None:
    """Check every field against the invariants of the module that owns it."""
    if cfg.suite not in SUITE_CHOICES:
        raise ConfigError(f"suite must be one of {SUITE_CHOICES}")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.workers != "auto" and (isinstance(cfg.workers, bool) or not isinstance(cfg.workers, int)
                                  or cfg.workers < 1):
        raise ConfigError("workers must be a positive integer or 'auto'")
    s = cfg.surface
    if not s.r_values:
        raise ConfigError("surface.r_values must not be empty")
    try:
        for r in s.r_values:
            ProfileSurface(r, s.x_max)
    except CuspflowError as exc:
        raise ConfigError(f"surface: {exc}") from exc
    if not 1e-13 <= s.tol <= 1e-6:
        raise ConfigError("surface.tol must lie in [1e-13, 1e-6]")
    if cfg.geometry.n_random_excursions < 1:
        raise ConfigError("geometry.n_random_excursions must be positive")
    e = cfg.excursion
    if e.n_depth_samples < 3 or e.n_winding_samples < 3:
        raise ConfigError("excursion sample counts must be at least 3")
    try:
        ProfileSurface(e.log_law_r, s.x_max)
    except CuspflowError as exc:
        raise ConfigError(f"excursion.log_law_r: {exc}") from exc
    m = cfg.mixing
    if m.kind not in KINDS:
        raise ConfigError(f"mixing.kind must be one of {KINDS}")
    for a in (m.intermittency,) + tuple(m.variance_intermittency):
        if not 0 < a < 1:
            raise ConfigError("intermittency exponents must lie in (0, 1)")
    if m.variance_T_min < 1 or m.variance_T_max < 100 * m.variance_T_min:
        raise ConfigError("mixing variance grid must span two decades (variance_T_max >= 100 * variance_T_min)")
    if m.variance_orbits < 10 or m.sandwich_orbits < 1:
        raise ConfigError("mixing.variance_orbits must be >= 10 and sandwich_orbits >= 1")
    try:
        eff = EffectiveAverageConfig(m.alpha, m.m, m.xi, m.k_max, m.k0)
        rate = (RateModel("polynomial", 1.0 / m.intermittency - 1.0) if m.kind == "intermittent"
                else RateModel("exponential", 1.0))
        eff.validate_for(rate, BumpFamily(m.theta).holder_exponent)
    except CuspflowError as exc:
        raise ConfigError(f"mixing: {exc}") from exc
    mc = cfg.montecarlo
    if mc.gap_law not in GAP_LAWS:
        raise ConfigError(f"montecarlo.gap_law must be one of {GAP_LAWS}")
    if not mc.mu_gap > 0 or mc.n_trajectories < 1 or not mc.t_min > 0:
        raise ConfigError("montecarlo.mu_gap, n_trajectories and t_min must be positive")
    if mc.T_max < mc.t_min * 1000 * (1 - 1e-12):
        raise ConfigError("montecarlo.T_max must be at least 1000 * t_min")
    try:
        AcceptanceWindow(mc.epsilon, mc.c)
    except CuspflowError as exc:
        raise ConfigError(f"montecarlo: {exc}") from exc


def parse_config(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return parse_config(data or {})
