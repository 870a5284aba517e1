"""Per-condition normalization, windowed samples, clipped RUL labels and the healthy subset."""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.cluster.vq import ClusterError, kmeans2

from .cmapss import Trajectory
from .errors import LatentHIError

log = logging.getLogger(__name__)

STD_FLOOR = 1e-6
CONSTANT_STD = 1e-8
KMEANS_RETRIES = 10


@dataclass(frozen=True)
class LabelConfig:
    r_early: float = 125.0
    healthy_rul_threshold: float = 125.0
    healthy_fallback_fraction: float = 0.2

    def __post_init__(self):
        if self.r_early <= 0:
            raise ValueError("r_early must be positive")
        if not 0 < self.healthy_fallback_fraction <= 1:
            raise ValueError("healthy_fallback_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class NormalizationModel:
    condition_centroids: np.ndarray  # (k, 3)
    per_condition_mean: np.ndarray  # (k, S)
    per_condition_std: np.ndarray  # (k, S)
    kept_sensor_indices: tuple[int, ...]

    @property
    def n_conditions(self) -> int:
        return self.condition_centroids.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.kept_sensor_indices)

    def assign(self, settings: np.ndarray) -> np.ndarray:
        d = ((settings[:, None, :] - self.condition_centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d, axis=1)

    def to_dict(self) -> dict:
        return {
            "condition_centroids": self.condition_centroids.tolist(),
            "per_condition_mean": self.per_condition_mean.tolist(),
            "per_condition_std": self.per_condition_std.tolist(),
            "kept_sensor_indices": list(self.kept_sensor_indices),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationModel":
        return cls(
            condition_centroids=np.asarray(d["condition_centroids"], dtype=np.float64),
            per_condition_mean=np.asarray(d["per_condition_mean"], dtype=np.float64),
            per_condition_std=np.asarray(d["per_condition_std"], dtype=np.float64),
            kept_sensor_indices=tuple(int(i) for i in d["kept_sensor_indices"]),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "NormalizationModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class WindowSample:
    unit_id: int
    cycle: int
    x: np.ndarray
    rul_label: float
    true_rul: float  # unclipped


def _cluster_settings(settings: np.ndarray, k: int, seed: int) -> np.ndarray:
    if k == 1:
        return settings.mean(axis=0, keepdims=True)
    rng = np.random.default_rng(seed)
    for attempt in range(KMEANS_RETRIES):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                centroids, labels = kmeans2(settings, k, minit="++", seed=rng, missing="raise")
        except ClusterError:
            log.info("k-means produced an empty cluster (attempt %d), re-seeding", attempt + 1)
            continue
        if len(np.unique(labels)) == k:
            return centroids
    raise LatentHIError(f"k-means left an empty cluster after {KMEANS_RETRIES} attempts (k={k})")


def fit_normalization(train: list[Trajectory], k: int, seed: int = 0) -> NormalizationModel:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not train:
        raise ValueError("cannot fit normalization on an empty training set")
    settings = np.concatenate([t.settings for t in train])
    sensors = np.concatenate([t.sensors for t in train])

    kept = tuple(int(i) for i in np.flatnonzero(sensors.std(axis=0) >= CONSTANT_STD))
    centroids = _cluster_settings(settings, k, seed)
    # order clusters lexicographically so the model does not depend on k-means label order
    centroids = centroids[np.lexsort(centroids.T[::-1])]

    model = NormalizationModel(centroids, np.zeros((k, len(kept))), np.ones((k, len(kept))), kept)
    labels = model.assign(settings)
    vals = sensors[:, kept]
    mean = np.zeros((k, len(kept)))
    std = np.ones((k, len(kept)))
    for c in range(k):
        rows = vals[labels == c]
        if rows.shape[0] == 0:
            raise LatentHIError(f"condition cluster {c} has no training rows")
        mean[c] = rows.mean(axis=0)
        std[c] = np.maximum(rows.std(axis=0), STD_FLOOR)
    return NormalizationModel(centroids, mean, std, kept)


def normalize(traj: Trajectory, model: NormalizationModel) -> np.ndarray:
    labels = model.assign(traj.settings)
    vals = traj.sensors[:, list(model.kept_sensor_indices)]
    return (vals - model.per_condition_mean[labels]) / model.per_condition_std[labels]


def denormalize(z: np.ndarray, settings: np.ndarray, model: NormalizationModel) -> np.ndarray:
    labels = model.assign(settings)
    return z * model.per_condition_std[labels] + model.per_condition_mean[labels]


def window_matrix(z: np.ndarray, window: int) -> np.ndarray:
    """Stack each row with its window-1 predecessors (oldest first), zero-padded at the start."""
    if window < 1:
        raise ValueError("window must be >= 1")
    n, s = z.shape
    padded = np.vstack([np.zeros((window - 1, s)), z])
    return np.hstack([padded[i : i + n] for i in range(window)])


def rul_targets(length: int, cfg: LabelConfig, true_rul_at_end: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(clipped, unclipped) RUL for cycles 1..length."""
    end = 0.0 if true_rul_at_end is None else float(true_rul_at_end)
    raw = end + (length - np.arange(1, length + 1)).astype(np.float64)
    return np.minimum(raw, cfg.r_early), raw


def make_samples(
    traj: Trajectory,
    model: NormalizationModel,
    cfg: LabelConfig,
    window: int = 1,
    true_rul_at_end: float | None = None,
    kind: str = "train",
) -> list[WindowSample]:
    if kind == "test" and true_rul_at_end is None:
        raise LatentHIError(f"test unit {traj.unit_id}: true_rul_at_end is required")
    x = window_matrix(normalize(traj, model), window)
    clipped, raw = rul_targets(traj.length, cfg, true_rul_at_end)
    return [
        WindowSample(traj.unit_id, i + 1, x[i], float(clipped[i]), float(raw[i]))
        for i in range(traj.length)
    ]


def stack_x(samples: list[WindowSample]) -> np.ndarray:
    if not samples:
        return np.empty((0, 0))
    return np.vstack([s.x for s in samples])


def healthy_subset(samples: list[WindowSample], cfg: LabelConfig) -> list[WindowSample]:
    by_unit: dict[int, list[WindowSample]] = {}
    for s in samples:
        by_unit.setdefault(s.unit_id, []).append(s)
    out = []
    for uid, unit in by_unit.items():
        chosen = [s for s in unit if s.true_rul > cfg.healthy_rul_threshold]
        if not chosen:
            unit = sorted(unit, key=lambda s: s.cycle)
            chosen = unit[: math.ceil(cfg.healthy_fallback_fraction * len(unit))]
        out.extend(chosen)
    return out


def export_samples_csv(samples: list[WindowSample], path):
    dim = samples[0].x.shape[0] if samples else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "cycle", "rul_label"] + [f"x{i}" for i in range(dim)])
        for s in samples:
            w.writerow([s.unit_id, s.cycle, f"{s.rul_label:.17g}"] + [f"{v:.17g}" for v in s.x])
