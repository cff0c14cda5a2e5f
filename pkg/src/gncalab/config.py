"""Flat run configuration with desk/paper presets, key=value config files,
and the run manifest written at the end of every CLI run."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Bad config file, unknown key, or unparsable value."""


@dataclass
class Config:
    """Every tunable in one place. Desk-scale values are the defaults; the
    `paper` preset restores the full published constants."""

    preset: str = "desk"
    seed: int = 0

    # architecture
    d_hidden: int = 256

    # voronoi rule learning
    voronoi_n: int = 200
    voronoi_kappa: float = 0.42
    voronoi_batches: int = 300
    voronoi_batch_size: int = 32
    voronoi_lr: float = 0.01
    voronoi_eval_steps: int = 1000

    # exact-rule MLP recipe
    mlp_lr: float = 1e-3
    mlp_weight_decay: float = 1e-3
    mlp_max_epochs: int = 100_000
    mlp_plateau_patience: int = 10_000
    mlp_plateau_min_delta: float = 1e-8
    mlp_max_attempts: int = 8

    # entropy sweep
    sweep_kappas: str = "0.05:0.95:0.05"
    sweep_steps: int = 1000
    sweep_n: int = 200

    # boids simulation
    boids_n: int = 50
    boids_steps: int = 200
    boids_radius: float = 0.15
    boids_boundary_margin: float = 0.2
    boids_separation: float = 0.015
    boids_align_scale: float = 0.125
    boids_cohesion_scale: float = 0.01
    boids_speed_limit: float = 0.01
    boids_max_turn_deg: float = 5.0
    boids_boundary_push: float = 0.005

    # boids imitation training
    boids_train_traj: int = 30
    boids_val_traj: int = 5
    boids_test_traj: int = 5
    boids_batch: int = 30
    boids_lr: float = 1e-3
    boids_plateau_patience: int = 10
    boids_stop_patience: int = 20
    boids_max_epochs: int = 100
    boids_rollout_steps: int = 1000
    boids_eval_seeds: int = 3
    boids_velocity_only: bool = False

    # fixed-target training
    target_t: str = "10:20"
    target_batch_k: int = 8
    target_lr: float = 1e-3
    target_cache: int = 1024
    target_batches_per_epoch: int = 10
    target_plateau_patience: int = 75
    target_stop_patience: int = 100
    target_max_epochs: int = 400
    target_clip_norm: float = 1.0
    target_min_epochs: int = 20
    target_stop_mse: float | None = 5e-4
    target_rollout_steps: int = 200
    target_swissroll_radius: float = 0.4

    # complexity metrics
    sampen_m: int = 2
    cd_m: int = 10


# full-scale constants from the published experiments
_PAPER_PRESET = {
    "voronoi_n": 1000,
    "voronoi_batches": 1000,
    "sweep_n": 1000,
    "boids_n": 100,
    "boids_steps": 500,
    "boids_train_traj": 300,
    "boids_val_traj": 30,
    "boids_test_traj": 30,
    "boids_max_epochs": 1000,
    "boids_eval_seeds": 5,
    "target_plateau_patience": 750,
    "target_stop_patience": 1000,
    "target_max_epochs": 10000,
    "target_stop_mse": None,
    "target_rollout_steps": 1000,
}

_PRESETS = {"desk": {}, "paper": _PAPER_PRESET}


def _parse_value(name: str, text: str, kind) -> object:
    text = text.strip()
    try:
        if kind is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == float | None or kind == "float | None":
            return None if text.lower() in ("none", "null", "") else float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"cannot parse config value {name}={text!r}") from exc


_FIELD_TYPES = {
    "preset": str,
    "sweep_kappas": str,
    "target_t": str,
    "boids_velocity_only": bool,
    "target_stop_mse": "float | None",
}


def _field_kind(f: dataclasses.Field):
    if f.name in _FIELD_TYPES:
        return _FIELD_TYPES[f.name]
    return type(getattr(Config(), f.name))


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Defaults -> preset -> config file -> explicit overrides, in that
    order; unknown keys are rejected."""
    values: dict = {}
    file_values: dict = {}
    if path is not None:
        file_values = _read_config_file(path)

    # the preset may be set by the file or the overrides; resolve it first
    preset = "desk"
    for source in (file_values, overrides or {}):
        if "preset" in source and source["preset"] is not None:
            preset = str(source["preset"])
    if preset not in _PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (expected desk or paper)")
    values.update(_PRESETS[preset])
    values["preset"] = preset

    known = {f.name: f for f in fields(Config)}
    for source in (file_values, overrides or {}):
        for key, val in source.items():
            if val is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(val, str) and key != "preset":
                val = _parse_value(key, val, _field_kind(known[key]))
            values[key] = val
    return Config(**values)


def _read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return out


def config_dict(cfg: Config) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg: Config) -> str:
    """Stable under key reordering: keys are serialised sorted."""
    doc = config_dict(cfg)
    text = "\n".join(f"{k}={doc[k]!r}" for k in sorted(doc))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    run_id: str
    seed: int
    command: str
    config: dict
    config_hash: str
    version: str
    started_at: str
    finished_at: str
    metrics: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)

    def save(self, path) -> None:
        # tmp + rename, so an interrupted run leaves no partial manifest
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=1, sort_keys=True)
        os.replace(tmp, path)
