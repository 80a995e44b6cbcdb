"""Run configuration: one YAML/JSON document validated in full before any work.

Unknown keys are rejected at every level with their dotted path.  A single
top-level ``seed`` drives every random stream (synthetic data, network
initialisation, training), so nested ``seed`` keys are refused.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data.params import ConstraintParams
from .data.synth import SyntheticProcessConfig
from .data.windows import WindowFilter
from .errors import ConfigError
from .gan.training import TrainingConfig
from .metrics.report import Thresholds
from .qp.solver import SolverConfig


@dataclass(frozen=True)
class DataConfig:
    fast_csv: str | None = None
    slow_csv: str | None = None
    timestamp_column: str = "timestamp"
    load_column: str = "load_kw"
    window: WindowFilter | None = None
    # trailing share of the slow readings held out for validation
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("data.holdout_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class EstimationConfig:
    """Manual overrides for the estimated constraint parameters."""

    k1: float | None = None
    k2: float | None = None
    k3: float | None = None


@dataclass(frozen=True)
class NetworkConfig:
    m: int = 15
    s: int = 1
    noise_dim: int = 8
    hidden: tuple[int, ...] = (128, 128)
    dropout: float = 0.3

    def __post_init__(self):
        if self.m < 1 or self.s < 1 or self.noise_dim < 1:
            raise ConfigError("network.m, network.s and network.noise_dim must be >= 1")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("network.hidden must list positive layer widths")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("network.dropout must lie in [0, 1)")


@dataclass(frozen=True)
class ValidationConfig:
    ks_max: float = 0.15
    max_violations: int = 0
    n_profiles: int = 500
    feas_tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.ks_max <= 1.0:
            raise ConfigError("validation.ks_max must lie in (0, 1]")
        if self.max_violations < 0 or self.n_profiles < 1 or self.feas_tol <= 0:
            raise ConfigError("validation: max_violations >= 0, n_profiles >= 1, feas_tol > 0")

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.ks_max, self.max_violations)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    data: DataConfig = field(default_factory=DataConfig)
    synth: SyntheticProcessConfig = field(default_factory=SyntheticProcessConfig)
    constraints: ConstraintParams | None = None
    params_json: str | None = None
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)

    def __post_init__(self):
        if self.constraints is not None and self.params_json is not None:
            raise ConfigError("give either constraints or params_json, not both")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        # the master seed wins over the nested ones
        object.__setattr__(self, "synth", dataclasses.replace(self.synth, seed=self.seed))
        object.__setattr__(self, "training", dataclasses.replace(self.training, seed=self.seed))

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# keys a user may not set because they are derived from the top-level document
_FORBIDDEN = {"synth.seed": "use the top-level seed", "training.seed": "use the top-level seed"}


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dt.date):
        return x.isoformat()
    if isinstance(x, np.generic):
        return x.item()
    return x


def _unwrap_optional(hint):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return hint, False


def _coerce(value, hint, path):
    hint, optional = _unwrap_optional(hint)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{path} must not be null")
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return value
    if hint is dt.date:
        if not isinstance(value, (str, dt.date)):
            raise ConfigError(f"{path} must be an ISO date, got {value!r}")
        return value
    if typing.get_origin(hint) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a list, got {value!r}")
        inner = typing.get_args(hint)[0]
        return tuple(_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value))
    return value


def _build(cls, mapping, path: str = ""):
    if isinstance(mapping, cls):
        return mapping
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {type(mapping).__name__}")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls) if f.init]
    unknown = sorted(set(mapping) - set(names))
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown key(s){where}: {', '.join(map(str, unknown))}")
    kwargs = {}
    for name in names:
        if name not in mapping:
            continue
        dotted = f"{path}.{name}" if path else name
        if dotted in _FORBIDDEN:
            raise ConfigError(f"{dotted} is not configurable: {_FORBIDDEN[dotted]}")
        kwargs[name] = _coerce(mapping[name], hints[name], dotted)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def config_from_dict(doc: dict | None) -> RunConfig:
    return _build(RunConfig, doc or {})


def load_config(path=None) -> RunConfig:
    """Read a YAML or JSON run configuration; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        doc = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from None
    return config_from_dict(doc)


def with_overrides(cfg: RunConfig, seed=None, out_dir=None, steps=None) -> RunConfig:
    """Apply command-line flag overrides on top of a loaded document."""
    if steps is not None:
        if steps < 0:
            raise ConfigError("--steps must be nonnegative")
        cfg = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, total_steps=steps))
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if out_dir is not None:
        cfg = dataclasses.replace(cfg, out_dir=str(out_dir))
    return cfg
