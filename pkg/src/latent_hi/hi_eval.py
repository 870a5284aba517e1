"""Monotonicity, trendability and prognosability of HI series.

monotonicity   mean over units of |#(diff > 0) - #(diff < 0)| / (n - 1)
trendability   min over unit pairs of |pearson|, the longer series linearly
               resampled to the shorter one's length; zero-variance -> 0
prognosability exp(-std(final values) / mean |final - first|), std with n-1
"""
from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .errors import MetricError

log = logging.getLogger(__name__)

CHANNELS = ("rec", "sap", "nap", "sap_ls", "nap_ls", "sigma_a", "sigma_e")


@dataclass(frozen=True)
class HISeries:
    unit_id: int
    channel: str
    values: np.ndarray


@dataclass(frozen=True)
class HIMetricRow:
    channel: str
    monotonicity: float
    trendability: float
    prognosability: float
    rul_rmse: float


def _values(series):
    return [np.asarray(s.values if isinstance(s, HISeries) else s, dtype=np.float64) for s in series]


def monotonicity(series_by_unit) -> float:
    scores = []
    for v in _values(series_by_unit):
        if v.size < 2:
            log.warning("monotonicity: skipping series of length %d", v.size)
            continue
        d = np.diff(v)
        scores.append(abs(int(np.sum(d > 0)) - int(np.sum(d < 0))) / (v.size - 1))
    if not scores:
        raise MetricError("monotonicity: no series of length >= 2")
    return float(np.mean(scores))


def _resample(v, n):
    if v.size == n:
        return v
    return np.interp(np.linspace(0.0, 1.0, n), np.linspace(0.0, 1.0, v.size), v)


def _abs_pearson(a, b):
    # test constancy before centering: the mean of a constant series may not round-trip
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    a = a - a.mean()
    b = b - b.mean()
    saa, sbb = float(a @ a), float(b @ b)
    if saa == 0 or sbb == 0:
        return 0.0
    # one sqrt of the product: sqrt(fl(s*s)) == s, so identical series give exactly 1
    return min(1.0, abs(float(a @ b)) / np.sqrt(saa * sbb))


def trendability(series_by_unit) -> float:
    vals = _values(series_by_unit)
    if len(vals) < 2:
        raise MetricError("trendability needs at least two units")
    best = 1.0
    for a, b in itertools.combinations(vals, 2):
        n = min(a.size, b.size)
        if n < 2:
            best = 0.0
            continue
        best = min(best, _abs_pearson(_resample(a, n), _resample(b, n)))
    return float(best)


def prognosability(series_by_unit) -> float:
    vals = _values(series_by_unit)
    if len(vals) < 2:
        raise MetricError("prognosability needs at least two units")
    finals = np.array([v[-1] for v in vals])
    ranges = np.array([abs(v[-1] - v[0]) for v in vals])
    spread = finals.std(ddof=1)
    if np.ptp(finals) == 0:
        spread = 0.0
    return float(np.exp(-spread / max(ranges.mean(), 1e-12)))


def metric_table(all_series: dict[str, list], rmse_by_channel: dict[str, float]) -> list[HIMetricRow]:
    """One row per channel present in both inputs, ordered like CHANNELS."""
    rows = []
    names = [c for c in CHANNELS if c in all_series or c in rmse_by_channel]
    names += sorted(set(all_series) - set(CHANNELS))
    for ch in names:
        if ch not in all_series or ch not in rmse_by_channel:
            log.warning("metric table: channel %s missing series or RMSE, omitted", ch)
            continue
        s = all_series[ch]
        rows.append(HIMetricRow(ch, monotonicity(s), trendability(s), prognosability(s), rmse_by_channel[ch]))
    return rows


def write_metric_table(rows: list[HIMetricRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "mono", "trend", "progno", "rul_rmse"])
        for r in rows:
            w.writerow([r.channel] + [f"{v:.17g}" for v in (r.monotonicity, r.trendability, r.prognosability, r.rul_rmse)])


@dataclass
class UnitSeries:
    """All HI channels of one unit, one value per cycle (cycles 1..length)."""

    unit_id: int
    channels: dict[str, np.ndarray]

    @property
    def length(self) -> int:
        return len(next(iter(self.channels.values())))


def to_hi_series(units: list[UnitSeries], channel: str) -> list[HISeries]:
    return [HISeries(u.unit_id, channel, u.channels[channel]) for u in units if channel in u.channels]
