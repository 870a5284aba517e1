"""Synthetic run-to-failure data written in the C-MAPSS text layout.

Useful for exercising the pipeline when the NASA files are not at hand.
Each unit follows an exponential wear curve; informative sensors drift with
wear and carry Gaussian noise, a fixed set of sensors is constant, and
multi-condition datasets draw each cycle's operating point from six regimes.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .cmapss import N_SENSORS, CANONICAL_COUNTS, check_dataset_name

CONDITIONS = np.array(
    [[0.0, 0.0, 100.0], [10.0, 0.25, 100.0], [20.0, 0.7, 100.0], [25.0, 0.62, 60.0], [35.0, 0.84, 100.0], [42.0, 0.84, 100.0]]
)
CONSTANT_SENSORS = (0, 4, 9, 15, 17, 18)


def _unit_rows(unit_id, n_cycles, life, rng, base, drift, noise, n_cond):
    t = np.arange(1, n_cycles + 1)
    wear = rng.uniform(0.0, 0.1) + (np.exp(4.0 * t / life) - 1.0) / (np.exp(4.0) - 1.0)
    cond = rng.integers(0, n_cond, size=n_cycles)
    settings = CONDITIONS[cond] + rng.normal(0, [0.002, 0.0002, 0.0], size=(n_cycles, 3)) if n_cond > 1 else (
        rng.normal(0, [0.002, 0.0003, 0.0], size=(n_cycles, 3)) + [0.0, 0.0, 100.0]
    )
    sensors = base[cond] + wear[:, None] * drift[None, :] + rng.normal(size=(n_cycles, N_SENSORS)) * noise
    sensors[:, list(CONSTANT_SENSORS)] = base[cond][:, list(CONSTANT_SENSORS)]
    return np.column_stack([np.full(n_cycles, unit_id), t, settings, sensors])


def _write(path, rows):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(f"{int(r[0])} {int(r[1])} " + " ".join(f"{v:.4f}" for v in r[2:]) + "  \n")


def write_synthetic_cmapss(out_dir, name="FD001", n_train=None, n_test=None, seed=0, min_life=128, max_life=362):
    """Write train_/test_/RUL_<name>.txt into ``out_dir``; unit counts default to the canonical ones."""
    check_dataset_name(name)
    canon_train, canon_test, n_cond, _ = CANONICAL_COUNTS[name]
    n_train = canon_train if n_train is None else n_train
    n_test = canon_test if n_test is None else n_test
    rng = np.random.default_rng(seed)
    base = rng.uniform(10.0, 1000.0, size=(n_cond, N_SENSORS)).round(2)
    drift = rng.choice([-1.0, 1.0], size=N_SENSORS) * rng.uniform(0.5, 3.0, size=N_SENSORS)
    noise = rng.uniform(0.3, 1.0, size=N_SENSORS)
    drift[list(CONSTANT_SENSORS)] = 0.0

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train = []
    for u in range(1, n_train + 1):
        life = int(rng.integers(min_life, max_life + 1))
        train.append(_unit_rows(u, life, life, rng, base, drift, noise, n_cond))
    test, ruls = [], []
    for u in range(1, n_test + 1):
        life = int(rng.integers(min_life, max_life + 1))
        cut = int(rng.integers(max(10, life // 4), life))
        test.append(_unit_rows(u, cut, life, rng, base, drift, noise, n_cond))
        ruls.append(life - cut)
    _write(out / f"train_{name}.txt", np.vstack(train))
    _write(out / f"test_{name}.txt", np.vstack(test))
    (out / f"RUL_{name}.txt").write_text("".join(f"{r}\n" for r in ruls))
    return out
