"""Experiment configuration: strict JSON schema with explicit defaults."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .aoi import DEFAULT_DELTA_MAX
from .dual import DualConfig
from .scheduling import SimConfig
from .source import ArSourceModel, load_model, reference_model


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass
class SweepConfig:
    p_grid: str = "0.3:1.0:0.05"
    buffers: list[int] = field(default_factory=lambda: [1, 2])


@dataclass
class ExperimentConfig:
    sensors: list[ArSourceModel] = field(default_factory=lambda: [reference_model(0.8), reference_model(0.8)])
    M: int = 1
    buffer: int = 2
    gamma: float = 0.99
    horizon: int = 100_000
    replications: int = 10
    seed: int = 0
    delta_max: int = DEFAULT_DELTA_MAX
    warmup: int | None = None
    vi_tol: float = 1e-9
    out_dir: str = "out"
    dual: DualConfig = field(default_factory=DualConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def sim_config(self, **overrides) -> SimConfig:
        kw = dict(
            sensors=list(self.sensors), M=self.M, b=self.buffer, gamma=self.gamma,
            horizon=self.horizon, replications=self.replications, seed=self.seed,
            delta_max=self.delta_max, warmup=self.warmup,
        )
        kw.update(overrides)
        return SimConfig(**kw)

    def with_success_prob(self, p: float) -> "ExperimentConfig":
        out = ExperimentConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        out.sensors = [m.with_success_prob(p) for m in self.sensors]
        return out

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["sensors"] = [m.to_dict() for m in self.sensors]
        d["dual"] = asdict(self.dual)
        d["sweep"] = asdict(self.sweep)
        return d

    def solve_digest(self) -> str:
        """Hash of everything the dual solve depends on."""
        d = self.to_json()
        keep = {k: d[k] for k in ("sensors", "M", "buffer", "gamma", "delta_max", "vi_tol", "dual")}
        return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()


_TOP_KEYS = {f.name for f in fields(ExperimentConfig)}


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    _check_keys(data, _TOP_KEYS, "config")
    kw = {k: v for k, v in data.items() if k not in ("sensors", "dual", "sweep")}
    try:
        if "sensors" in data:
            sensors = []
            for i, entry in enumerate(data["sensors"]):
                if isinstance(entry, str):
                    path = Path(entry)
                    if base_dir is not None and not path.is_absolute():
                        path = base_dir / path
                    sensors.append(load_model(path))
                else:
                    sensors.append(ArSourceModel.from_dict(entry))
            if not sensors:
                raise ConfigError("'sensors' must list at least one model")
            kw["sensors"] = sensors
        if "dual" in data:
            _check_keys(data["dual"], {f.name for f in fields(DualConfig)}, "dual")
            kw["dual"] = DualConfig(**data["dual"])
        if "sweep" in data:
            _check_keys(data["sweep"], {f.name for f in fields(SweepConfig)}, "sweep")
            kw["sweep"] = SweepConfig(**data["sweep"])
        cfg = ExperimentConfig(**kw)
        validate(cfg)
    except ConfigError:
        raise
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.M < 1:
        raise ConfigError("M must be >= 1")
    if cfg.buffer < 1:
        raise ConfigError("buffer must be >= 1")
    if cfg.delta_max < cfg.buffer + 1:
        raise ConfigError(f"delta_max must be >= buffer + 1 = {cfg.buffer + 1}")
    if not 0.0 <= cfg.gamma < 1.0:
        raise ConfigError("gamma must lie in [0, 1); the discounted objective is undefined at gamma = 1")
    if cfg.vi_tol <= 0:
        raise ConfigError("vi_tol must be positive")
    try:
        cfg.sim_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    parse_grid(cfg.sweep.p_grid)
    if not cfg.sweep.buffers or any(int(b) < 1 for b in cfg.sweep.buffers):
        raise ConfigError("sweep.buffers must be a nonempty list of positive integers")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data, path.parent)


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` with an inclusive stop, e.g. ``0.3:1.0:0.05``."""
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"p grid must look like start:stop:step, got {spec!r}") from None
    if not (0.0 < start <= stop <= 1.0) or step <= 0:
        raise ConfigError(f"p grid needs 0 < start <= stop <= 1 and step > 0, got {spec!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]
