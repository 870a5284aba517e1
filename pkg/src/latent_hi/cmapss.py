"""Readers for the C-MAPSS turbofan text files (train_/test_/RUL_FD00x.txt)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ParseError, UnknownDatasetError

log = logging.getLogger(__name__)

N_SETTINGS = 3
N_SENSORS = 21
N_COLUMNS = 2 + N_SETTINGS + N_SENSORS

# (train units, test units, operating conditions, fault modes)
CANONICAL_COUNTS = {
    "FD001": (100, 100, 1, 1),
    "FD002": (260, 259, 6, 1),
    "FD003": (100, 100, 1, 2),
    "FD004": (248, 249, 6, 2),
}
DATASETS = tuple(CANONICAL_COUNTS)


@dataclass(frozen=True)
class Trajectory:
    """One engine's run: settings and sensor readings ordered by cycle."""

    unit_id: int
    settings: np.ndarray  # (length, 3)
    sensors: np.ndarray  # (length, 21)

    @property
    def length(self) -> int:
        return self.sensors.shape[0]

    @property
    def cycles(self) -> np.ndarray:
        return np.arange(1, self.length + 1)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.unit_id == other.unit_id
            and np.array_equal(self.settings, other.settings)
            and np.array_equal(self.sensors, other.sensors)
        )


@dataclass
class DatasetSplit:
    name: str
    train: list[Trajectory]
    test: list[Trajectory]
    test_rul: dict[int, int] = field(default_factory=dict)

    @property
    def n_conditions(self) -> int:
        return CANONICAL_COUNTS[self.name][2]


def check_dataset_name(name: str) -> str:
    if name not in CANONICAL_COUNTS:
        raise UnknownDatasetError(f"unknown dataset {name!r}; expected one of {', '.join(DATASETS)}")
    return name


def _parse_rows(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != N_COLUMNS:
                raise ParseError(path, line_no, f"expected {N_COLUMNS} columns, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(path, line_no, f"non-numeric field ({exc})") from None
    if not rows:
        return np.empty((0, N_COLUMNS))
    return np.asarray(rows, dtype=np.float64)


def parse_trajectories(path, kind: str = "train") -> list[Trajectory]:
    """Parse a train_ or test_ file into per-unit trajectories.

    Units must appear as contiguous blocks with ids 1..N and cycles 1..length.
    """
    if kind not in ("train", "test"):
        raise ValueError(f"kind must be 'train' or 'test', got {kind!r}")
    path = Path(path)
    data = _parse_rows(path)
    if data.shape[0] == 0:
        log.warning("%s contains no rows", path)
        return []

    unit_col = data[:, 0]
    cycle_col = data[:, 1]
    if np.any(unit_col != np.round(unit_col)) or np.any(cycle_col != np.round(cycle_col)):
        raise IntegrityError(f"{path}: unit and cycle columns must be integers")

    out = []
    bounds = np.flatnonzero(np.diff(unit_col)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(unit_col)]])
    for expected_id, (a, b) in enumerate(zip(starts, ends), start=1):
        uid = int(unit_col[a])
        if uid != expected_id:
            raise IntegrityError(f"{path}: unit ids not contiguous; expected {expected_id}, found {uid} at row {a + 1}")
        cycles = cycle_col[a:b]
        if not np.array_equal(cycles, np.arange(1, b - a + 1)):
            bad = int(np.flatnonzero(cycles != np.arange(1, b - a + 1))[0])
            raise IntegrityError(
                f"{path}: unit {uid} has non-contiguous cycles (row {a + bad + 1}, cycle {int(cycles[bad])})"
            )
        out.append(
            Trajectory(
                unit_id=uid,
                settings=data[a:b, 2 : 2 + N_SETTINGS].copy(),
                sensors=data[a:b, 2 + N_SETTINGS :].copy(),
            )
        )
    return out


def parse_rul_file(path, test: list[Trajectory]) -> dict[int, int]:
    path = Path(path)
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                v = int(s)
            except ValueError:
                raise ParseError(path, line_no, f"expected one integer, got {s!r}") from None
            if v < 0:
                raise ParseError(path, line_no, f"negative RUL {v}")
            values.append(v)
    if len(values) != len(test):
        raise IntegrityError(f"{path}: {len(values)} RUL values for {len(test)} test units")
    return {traj.unit_id: v for traj, v in zip(test, values)}


def load_split(data_dir, name: str) -> DatasetSplit:
    check_dataset_name(name)
    data_dir = Path(data_dir)
    paths = {k: data_dir / f"{k}_{name}.txt" for k in ("train", "test", "RUL")}
    for p in paths.values():
        if not p.is_file():
            raise FileNotFoundError(f"missing C-MAPSS file: {p}")

    train = parse_trajectories(paths["train"], "train")
    test = parse_trajectories(paths["test"], "test")
    test_rul = parse_rul_file(paths["RUL"], test)

    n_train, n_test = CANONICAL_COUNTS[name][:2]
    if (len(train), len(test)) != (n_train, n_test):
        log.warning(
            "%s: %d/%d train/test units, canonical files have %d/%d",
            name, len(train), len(test), n_train, n_test,
        )
    return DatasetSplit(name=name, train=train, test=test, test_rul=test_rul)


def format_trajectories(trajs: list[Trajectory]) -> str:
    """Serialize trajectories back to the C-MAPSS text layout."""
    lines = []
    for t in trajs:
        for i in range(t.length):
            vals = [repr(float(v)) for v in t.settings[i]] + [repr(float(v)) for v in t.sensors[i]]
            lines.append(f"{t.unit_id} {i + 1} " + " ".join(vals) + "  ")
    return "\n".join(lines) + ("\n" if lines else "")
