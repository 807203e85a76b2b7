"""Declarative run configuration (YAML) with strict key validation and a stable fingerprint."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .ingest import BENCHMARK_SCENES, HorizonConfig
from .model import NetworkConfig, TrainConfig
from .pipeline import MapConfig
from .recwin import WindowConfig
from .social import SocialParams

__all__ = ["ConfigError", "DataConfig", "EvalConfig", "RunConfig", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    root: str = "data/ethucy"
    scenes: tuple[str, ...] = BENCHMARK_SCENES
    frame_interval_s: float = 0.4
    train_stride: int = 1  # window-start stride for training samples
    test_stride: int = 1


@dataclass(frozen=True)
class EvalConfig:
    dynamic_scene: str = "univ"
    dynamic_min_samples: int = 20  # smallest test set accepted for one record period


_SECTIONS = {
    "data": DataConfig,
    "horizon": HorizonConfig,
    "record_window": WindowConfig,
    "grid": MapConfig,
    "model": NetworkConfig,
    "train": TrainConfig,
    "social": SocialParams,
    "eval": EvalConfig,
}


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    horizon: HorizonConfig = field(default_factory=HorizonConfig)
    record_window: WindowConfig = field(default_factory=WindowConfig)
    grid: MapConfig = field(default_factory=MapConfig)
    model: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    social: SocialParams = field(default_factory=SocialParams)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: str = "runs/default"

    def __post_init__(self):
        m, h = self.model, self.horizon
        if (m.t_obs, m.t_pred) != (h.t_obs, h.t_pred):
            raise ConfigError(f"model horizon ({m.t_obs}, {m.t_pred}) disagrees with horizon ({h.t_obs}, {h.t_pred})")
        side = int(round(2 * self.grid.half_side / self.grid.resolution))
        if side != m.patch:
            raise ConfigError(f"grid gives {side}x{side} local maps but model.patch is {m.patch}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in _SECTIONS:
            d = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        out["output"] = self.output
        return out

    def fingerprint(self) -> str:
        """sha256 over the canonical JSON form; ``output`` is excluded so moving a run keeps its hash."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, raw: dict[str, Any] | None) -> "RunConfig":
        raw = dict(raw or {})
        unknown = set(raw) - set(_SECTIONS) - {"output", "seed"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for name, klass in _SECTIONS.items():
            section = raw.get(name) or {}
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in dataclasses.fields(klass)}
            bad = set(section) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
            values = {}
            for f in dataclasses.fields(klass):
                if f.name in section:
                    v = section[f.name]
                    values[f.name] = tuple(v) if isinstance(v, list) else v
            try:
                kwargs[name] = klass(**values)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {name!r} section: {exc}") from exc
        if "seed" in raw:
            kwargs["train"] = dataclasses.replace(kwargs["train"], seed=int(raw["seed"]))
        if "output" in raw:
            kwargs["output"] = str(raw["output"])
        return cls(**kwargs)

    def with_overrides(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return RunConfig.from_dict(raw)
