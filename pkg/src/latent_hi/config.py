"""Flat ``key = value`` run configuration with ``--set key=value`` overrides."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .forest import ForestParams
from .models import TrainConfig
from .preprocess import LabelConfig
from .rul_bench import HIGroup
from .uq import UQConfig


@dataclass
class RunConfig:
    data_dir: str = "data/CMAPSS"
    dataset: str = "FD001"
    model: str = "ae"
    output_dir: str = "runs/FD001-ae"
    window: int = 1
    lag: int = 1
    k: int | None = None  # operating-condition count override
    hidden: tuple[int, ...] = (32, 16)
    latent_dim: int = 8
    train: TrainConfig = field(default_factory=TrainConfig)
    uq: UQConfig = field(default_factory=UQConfig)
    labels: LabelConfig = field(default_factory=LabelConfig)
    forest: ForestParams = field(default_factory=ForestParams)
    seeds: tuple[int, ...] = (0, 1, 2)
    groups: tuple[HIGroup, ...] | None = None  # None -> default groups for the model kind
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)

    def validate(self):
        if self.model not in ("ae", "vae"):
            raise ConfigError(f"model must be 'ae' or 'vae', got {self.model!r}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.window < 1 or self.lag < 1 or self.threads < 1:
            raise ConfigError("window, lag and threads must be >= 1")
        self.uq.validate()
        return self


def _ints(s):
    return tuple(int(v) for v in s.replace(" ", "").split(",") if v)


def _groups(s):
    # "name:ch1+ch2; name2:ch3"
    out = []
    for part in s.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, chans = part.partition(":")
        if not chans:
            raise ConfigError(f"group spec {part!r} must look like name:ch1+ch2")
        out.append(HIGroup(name.strip(), tuple(c.strip() for c in chans.split("+"))))
    return tuple(out)


def _opt_int(s):
    return None if s.lower() in ("", "none") else int(s)


# key -> (section, attribute, parser)
KEYS = {
    "data_dir": (None, "data_dir", str),
    "dataset": (None, "dataset", str),
    "model": (None, "model", str),
    "output_dir": (None, "output_dir", str),
    "window": (None, "window", int),
    "lag": (None, "lag", int),
    "k": (None, "k", _opt_int),
    "hidden": (None, "hidden", _ints),
    "latent_dim": (None, "latent_dim", int),
    "seeds": (None, "seeds", _ints),
    "groups": (None, "groups", _groups),
    "threads": (None, "threads", int),
    "seed": ("train", "seed", int),
    "epochs": ("train", "epochs", int),
    "batch_size": ("train", "batch_size", int),
    "learning_rate": ("train", "learning_rate", float),
    "dropout_rate": ("train", "dropout_rate", float),
    "beta": ("train", "beta", float),
    "uq_passes": ("uq", "n_passes", int),
    "uq_dropout_rate": ("uq", "dropout_rate", float),
    "uq_seed": ("uq", "seed", int),
    "r_early": ("labels", "r_early", float),
    "healthy_rul_threshold": ("labels", "healthy_rul_threshold", float),
    "healthy_fallback_fraction": ("labels", "healthy_fallback_fraction", float),
    "n_trees": ("forest", "n_trees", int),
    "max_depth": ("forest", "max_depth", _opt_int),
    "min_samples_leaf": ("forest", "min_samples_leaf", int),
    "feature_subsample": ("forest", "feature_subsample", float),
}


def parse_pairs(text: str, source="config") -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{n}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def build_config(pairs: dict[str, str]) -> RunConfig:
    from dataclasses import replace

    cfg = RunConfig()
    sections: dict[str, dict] = {"train": {}, "uq": {}, "labels": {}, "forest": {}}
    for key, raw in pairs.items():
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        section, attr, parse = KEYS[key]
        try:
            value = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
        if section is None:
            setattr(cfg, attr, value)
        else:
            sections[section][attr] = value
    try:
        for section, changes in sections.items():
            if changes:
                setattr(cfg, section, replace(getattr(cfg, section), **changes))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path=None, overrides=()) -> RunConfig:
    pairs = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {p}")
        pairs.update(parse_pairs(p.read_text(), str(p)))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        pairs[key.strip()] = value.strip()
    return build_config(pairs)
