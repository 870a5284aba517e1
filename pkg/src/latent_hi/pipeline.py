"""End-to-end stages shared by the CLI and the acceptance checks."""
from __future__ import annotations

import csv
import logging
import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import hi_eval, rapp, rul_bench, uq
from .cmapss import CANONICAL_COUNTS, DatasetSplit
from .config import RunConfig
from .hi_eval import UnitSeries
from .models import build_ae, build_vae, train
from .preprocess import NormalizationModel, fit_normalization, healthy_subset, make_samples, stack_x

log = logging.getLogger(__name__)


@contextmanager
def atomic_path(path):
    """Yield a temporary sibling path that replaces ``path`` only if the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def fit_split_normalization(split: DatasetSplit, cfg: RunConfig) -> NormalizationModel:
    k = cfg.k if cfg.k is not None else CANONICAL_COUNTS[split.name][2]
    return fit_normalization(split.train, k, seed=cfg.train.seed)


def split_samples(split, norm, cfg: RunConfig):
    """Per-unit sample lists for the train and test sides."""
    train = {t.unit_id: make_samples(t, norm, cfg.labels, cfg.window) for t in split.train}
    test = {
        t.unit_id: make_samples(t, norm, cfg.labels, cfg.window, split.test_rul[t.unit_id], kind="test")
        for t in split.test
    }
    return train, test


def healthy_matrix(train_samples, cfg: RunConfig) -> np.ndarray:
    flat = [s for unit in train_samples.values() for s in unit]
    return stack_x(healthy_subset(flat, cfg.labels))


def train_model(X_healthy, cfg: RunConfig):
    """Build, train and NAP-calibrate the configured model. Returns (model, curve, calibrations)."""
    tc = cfg.train
    build = build_vae if cfg.model == "vae" else build_ae
    kw = {"beta": tc.beta} if cfg.model == "vae" else {}
    model = build(X_healthy.shape[1], cfg.hidden, cfg.latent_dim, tc.dropout_rate, seed=tc.seed, **kw)
    model, curve = train(model, X_healthy, tc)
    return model, curve, rapp.calibrate_model(model, X_healthy)


def extract_units(model, cals, samples_by_unit, uq_cfg) -> list[UnitSeries]:
    out = []
    for uid in sorted(samples_by_unit):
        X = stack_x(samples_by_unit[uid])
        ch = rapp.extract_rapp_series(model, X, cals)
        ch.update(uq.extract_uq_series(model, X, uq_cfg, unit_id=uid))
        out.append(UnitSeries(uid, ch))
    return out


def series_columns(kind: str) -> list[str]:
    return list(rapp.RAPP_CHANNELS) + (["sigma_a"] if kind == "vae" else []) + ["sigma_e"]


def write_unit_series(unit: UnitSeries, path, kind):
    cols = series_columns(kind)
    with atomic_path(path) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle"] + cols)
        for i in range(unit.length):
            w.writerow([i + 1] + [f"{unit.channels[c][i]:.17g}" for c in cols])


def read_unit_series(path, unit_id) -> UnitSeries:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    return UnitSeries(unit_id, {c: data[:, j].copy() for j, c in enumerate(header) if c != "cycle"})


def unit_file(side_dir, unit_id) -> Path:
    return Path(side_dir) / f"unit_{unit_id:04d}.csv"


def read_series_dir(side_dir) -> list[UnitSeries]:
    files = sorted(Path(side_dir).glob("unit_*.csv"))
    return [read_unit_series(f, int(f.stem.split("_")[1])) for f in files]


def benchmark(train_units, test_units, test_rul, cfg: RunConfig, annotate_sota=False):
    """Ablation report over the configured groups plus per-channel runs for the metric table."""
    groups = list(cfg.groups) if cfg.groups is not None else rul_bench.default_groups(cfg.model)
    kw = dict(
        params=cfg.forest, lag=cfg.lag, cfg=cfg.labels, dataset=cfg.dataset,
        model_kind=cfg.model, annotate_sota=annotate_sota, threads=cfg.threads,
    )
    report = rul_bench.run_ablation(train_units, test_units, test_rul, groups, list(cfg.seeds), **kw)
    channels = rul_bench.run_ablation(
        train_units, test_units, test_rul, rul_bench.channel_groups(cfg.model), list(cfg.seeds), **kw
    )
    rmse_by_channel = channels.medians()
    all_series = {c: hi_eval.to_hi_series(train_units, c) for c in rul_bench.all_channel_names(cfg.model)}
    metrics = hi_eval.metric_table(all_series, rmse_by_channel)
    return report, channels, metrics
