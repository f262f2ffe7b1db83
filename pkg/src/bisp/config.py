"""Experiment configuration: a small YAML schema with dotted overrides.

Sections and keys::

    data:     root, image_size
    synth:    num_train_videos, num_test_videos, frames_per_video,
              normal_speed, anomaly_modes, seed
    variant:  strategy, skip_frames, varca, consa
    train:    learning_rate, batch_size, epochs, max_steps, seed,
              log_every, betas, adam_epsilon
    scoring:  w_f, w_b, num_scales, pool_sizes, smooth_sigma, epsilon
    output:   dir
    eval:     checkpoint, batch_size, weight_sweep
    viz:      mode, dumps, video, frame

Every key has a default, so a config file only states what differs.
Overrides are ``section.key=value`` strings whose values parse as YAML.
If ``output.dir`` is relative it is resolved against the environment
variable named by ``OUTPUT_ROOT_ENV`` (when set), else the working
directory.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .model import VariantSpec
from .scoring import ScoringConfig
from .synth import SynthSpec
from .train import TrainConfig

OUTPUT_ROOT_ENV = "BISP_OUTPUT_ROOT"

DEFAULTS: dict[str, dict] = {
    "data": {"root": None, "image_size": 256},
    "synth": {
        "num_train_videos": 8,
        "num_test_videos": 4,
        "frames_per_video": 60,
        "normal_speed": 2,
        "anomaly_modes": ["fast_motion", "novel_shape"],
        "seed": 0,
    },
    "variant": {"strategy": "bisp", "skip_frames": True, "varca": True, "consa": True},
    "train": {
        "learning_rate": 2e-4,
        "batch_size": 4,
        "epochs": 5,
        "max_steps": None,
        "seed": 0,
        "log_every": 10,
        "betas": [0.9, 0.999],
        "adam_epsilon": 1e-8,
    },
    "scoring": {
        "w_f": 0.5,
        "w_b": 0.5,
        "num_scales": 3,
        "pool_sizes": [4, 8, 16],
        "smooth_sigma": 3.0,
        "epsilon": 1e-8,
    },
    "output": {"dir": "runs/default"},
    "eval": {"checkpoint": None, "batch_size": 4, "weight_sweep": False},
    "viz": {"mode": "scores", "dumps": [], "video": None, "frame": None},
}


def _check_keys(sections: dict) -> None:
    if not isinstance(sections, dict):
        raise ConfigurationError("config root must be a mapping of sections")
    for section, values in sections.items():
        if section not in DEFAULTS:
            raise ConfigurationError(
                f"unknown config section '{section}'; expected one of {sorted(DEFAULTS)}"
            )
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigurationError(f"config section '{section}' must be a mapping")
        unknown = set(values) - set(DEFAULTS[section])
        if unknown:
            raise ConfigurationError(
                f"unknown keys in section '{section}': {sorted(unknown)}"
            )


def parse_override(text: str) -> tuple[str, str, object]:
    """Split ``section.key=value``; the value is parsed as YAML."""
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigurationError(f"override '{text}' must look like section.key=value")
    parts = key.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigurationError(f"override key '{key}' must look like section.key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return parts[0], parts[1], value


@dataclass
class ExperimentConfig:
    """Validated config; accessors build the typed objects lazily."""

    sections: dict

    @classmethod
    def from_dict(cls, data: dict | None, overrides: tuple[str, ...] = ()) -> "ExperimentConfig":
        data = data or {}
        _check_keys(data)
        merged = copy.deepcopy(DEFAULTS)
        for section, values in data.items():
            merged[section].update(values or {})
        for text in overrides:
            section, key, value = parse_override(text)
            _check_keys({section: {key: value}})
            merged[section][key] = value
        return cls(sections=merged)

    def get(self, section: str, key: str):
        return self.sections[section][key]

    # ---- typed accessors -------------------------------------------------

    def data_root(self, required: bool = True) -> Path | None:
        root = self.get("data", "root")
        if root is None:
            if required:
                raise ConfigurationError("config needs data.root for this command")
            return None
        return Path(root)

    @property
    def image_size(self) -> int:
        return int(self.get("data", "image_size"))

    def synth_spec(self) -> SynthSpec:
        s = self.sections["synth"]
        return SynthSpec(
            num_train_videos=int(s["num_train_videos"]),
            num_test_videos=int(s["num_test_videos"]),
            frames_per_video=int(s["frames_per_video"]),
            normal_speed=int(s["normal_speed"]),
            anomaly_modes=tuple(s["anomaly_modes"]),
            seed=int(s["seed"]),
        )

    def variant(self) -> VariantSpec:
        v = self.sections["variant"]
        return VariantSpec(
            strategy=str(v["strategy"]),
            skip_frames=bool(v["skip_frames"]),
            varca=bool(v["varca"]),
            consa=bool(v["consa"]),
        )

    def scoring(self) -> ScoringConfig:
        s = self.sections["scoring"]
        return ScoringConfig(
            w_f=float(s["w_f"]),
            w_b=float(s["w_b"]),
            num_scales=int(s["num_scales"]),
            pool_sizes=tuple(s["pool_sizes"]),
            smooth_sigma=float(s["smooth_sigma"]),
            epsilon=float(s["epsilon"]),
        )

    def train_config(self) -> TrainConfig:
        t = self.sections["train"]
        betas = tuple(float(b) for b in t["betas"])
        if len(betas) != 2:
            raise ConfigurationError(f"train.betas needs two values, got {t['betas']}")
        return TrainConfig(
            data_root=self.data_root(required=False),
            image_size=self.image_size,
            variant=self.variant(),
            scoring=self.scoring(),
            learning_rate=float(t["learning_rate"]),
            betas=betas,
            adam_epsilon=float(t["adam_epsilon"]),
            batch_size=int(t["batch_size"]),
            epochs=int(t["epochs"]),
            max_steps=None if t["max_steps"] is None else int(t["max_steps"]),
            seed=int(t["seed"]),
            log_every=int(t["log_every"]),
        )

    def output_dir(self) -> Path:
        out = Path(self.get("output", "dir"))
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if not out.is_absolute() and root:
            out = Path(root) / out
        return out

    def eval_checkpoint(self) -> Path:
        explicit = self.get("eval", "checkpoint")
        if explicit is not None:
            return Path(explicit)
        return self.output_dir() / "train" / "model.pt"


def load_config(path: str | Path, overrides: tuple[str, ...] = ()) -> ExperimentConfig:
    """Read a YAML config file and apply ``section.key=value`` overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"{path} must contain a mapping, got {type(data).__name__}")
    return ExperimentConfig.from_dict(data, overrides)
