"""Command-line pipeline: prepare -> train -> extract -> bench (or ``run`` for all four).

Exit codes: 0 success, 1 usage/config, 2 I/O or data, 3 training, 4 checkpoint/schema.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import checkpoint, pipeline
from .cmapss import CANONICAL_COUNTS, load_split
from .config import RunConfig, load_config
from .errors import (
    CheckpointError, ConfigError, IntegrityError, LatentHIError, ParseError, TrainingError, UnknownDatasetError,
)
from .hi_eval import write_metric_table
from .preprocess import NormalizationModel
from .rul_bench import write_predictions_csv, write_report_csv

log = logging.getLogger("latent_hi")

EXIT_USAGE, EXIT_IO, EXIT_TRAIN, EXIT_CHECKPOINT = 1, 2, 3, 4

NORMALIZATION_FILE = "normalization.json"
SUMMARY_FILE = "summary.txt"
CHECKPOINT_FILE = "model.lhi"
LOSS_FILE = "loss_curve.csv"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir)


def _load_norm(cfg):
    path = _out(cfg) / NORMALIZATION_FILE
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run 'prepare' first")
    return NormalizationModel.load(path)


def cmd_prepare(cfg: RunConfig):
    split = load_split(cfg.data_dir, cfg.dataset)
    norm = pipeline.fit_split_normalization(split, cfg)
    train_samples, _ = pipeline.split_samples(split, norm, cfg)
    n_healthy = pipeline.healthy_matrix(train_samples, cfg).shape[0]
    exp_train, exp_test, n_cond, n_faults = CANONICAL_COUNTS[cfg.dataset]
    lines = [
        f"dataset {cfg.dataset}",
        f"train_units {len(split.train)} expected {exp_train}",
        f"test_units {len(split.test)} expected {exp_test}",
        f"conditions {norm.n_conditions} expected {n_cond}",
        f"fault_modes {n_faults}",
        f"kept_sensors {','.join(str(i + 1) for i in norm.kept_sensor_indices)}",
        f"window {cfg.window}",
        f"sample_dim {norm.n_features * cfg.window}",
        f"train_cycles {sum(t.length for t in split.train)}",
        f"test_cycles {sum(t.length for t in split.test)}",
        f"healthy_samples {n_healthy}",
    ]
    with pipeline.atomic_path(_out(cfg) / NORMALIZATION_FILE) as tmp:
        norm.save(tmp)
    with pipeline.atomic_path(_out(cfg) / SUMMARY_FILE) as tmp:
        tmp.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_train(cfg: RunConfig):
    split = load_split(cfg.data_dir, cfg.dataset)
    norm = _load_norm(cfg)
    train_samples, _ = pipeline.split_samples(split, norm, cfg)
    X = pipeline.healthy_matrix(train_samples, cfg)
    model, curve, cals = pipeline.train_model(X, cfg)
    out = _out(cfg)
    with pipeline.atomic_path(out / CHECKPOINT_FILE) as tmp:
        tmp.write_text(checkpoint.dumps(model, cals))
    with pipeline.atomic_path(out / LOSS_FILE) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if cfg.model == "vae":
            w.writerow(["epoch", "loss", "recon", "kl"])
            for i, row in enumerate(zip(curve.loss, curve.recon, curve.kl)):
                w.writerow([i] + [f"{v:.17g}" for v in row])
        else:
            w.writerow(["epoch", "loss"])
            for i, v in enumerate(curve.loss):
                w.writerow([i, f"{v:.17g}"])
    final = f"{curve.loss[-1]:.6g}" if curve.loss else "n/a"
    print(f"trained {cfg.model} on {X.shape[0]} healthy samples; final loss {final}")


def cmd_extract(cfg: RunConfig, checkpoint_path=None):
    path = Path(checkpoint_path) if checkpoint_path else _out(cfg) / CHECKPOINT_FILE
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found; run 'train' first")
    model = checkpoint.load_checkpoint(path, kind=cfg.model)
    cals = checkpoint.load_calibrations(path)
    split = load_split(cfg.data_dir, cfg.dataset)
    norm = _load_norm(cfg)
    train_samples, test_samples = pipeline.split_samples(split, norm, cfg)
    for side, samples in (("train", train_samples), ("test", test_samples)):
        units = pipeline.extract_units(model, cals, samples, cfg.uq)
        side_dir = _out(cfg) / "series" / side
        for u in units:
            pipeline.write_unit_series(u, pipeline.unit_file(side_dir, u.unit_id), cfg.model)
        print(f"wrote {len(units)} {side} series to {side_dir}")


def cmd_bench(cfg: RunConfig, annotate_sota=False):
    out = _out(cfg)
    train_units = pipeline.read_series_dir(out / "series" / "train")
    test_units = pipeline.read_series_dir(out / "series" / "test")
    if not train_units or not test_units:
        raise FileNotFoundError(f"no HI series under {out / 'series'}; run 'extract' first")
    split = load_split(cfg.data_dir, cfg.dataset)
    report, channels, metrics = pipeline.benchmark(train_units, test_units, split.test_rul, cfg, annotate_sota)

    for name, writer, obj in (
        ("benchmark_report.csv", write_report_csv, report),
        ("channel_report.csv", write_report_csv, channels),
        ("predictions.csv", write_predictions_csv, report),
        ("hi_metrics.csv", write_metric_table, metrics),
    ):
        with pipeline.atomic_path(out / name) as tmp:
            writer(obj, tmp)

    best, best_rmse = report.best_group()
    ch = channels.medians()
    lines = [f"dataset {cfg.dataset} model {cfg.model} evaluation last-cycle"]
    lines += [f"median_rmse {g} {v:.6f}" for g, v in report.medians().items()]
    lines.append(f"best_group {best} {best_rmse:.6f}")
    if "sap_ls" in ch and "sap" in ch:
        ok = ch["sap_ls"] < ch["sap"]
        lines.append(
            f"sap_ordering sap_ls<sap {'holds' if ok else 'FAILS'} ({ch['sap_ls']:.6f} vs {ch['sap']:.6f})"
        )
    if report.reference:
        lines += [f"reference {k} {v}" for k, v in sorted(report.reference.items())]
    with pipeline.atomic_path(out / "bench_summary.txt") as tmp:
        tmp.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_run(cfg: RunConfig, annotate_sota=False):
    cmd_prepare(cfg)
    cmd_train(cfg)
    cmd_extract(cfg)
    cmd_bench(cfg, annotate_sota)


def make_parser():
    p = _Parser(prog="latent-hi", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["prepare", "train", "extract", "bench", "run"])
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--dataset")
    p.add_argument("--model", choices=["ae", "vae"])
    p.add_argument("--seed", type=int, help="model training seed")
    p.add_argument("--threads", type=int)
    p.add_argument("--annotate-sota", action="store_true", help="add reference SOTA RMSE to the report")
    p.add_argument("--out", help="output directory")
    p.add_argument("--checkpoint", help="checkpoint for 'extract' (default: <out>/model.lhi)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = list(args.set)
    for flag, key in (("dataset", "dataset"), ("model", "model"), ("seed", "seed"), ("threads", "threads"), ("out", "output_dir")):
        if getattr(args, flag) is not None:
            overrides.append(f"{key}={getattr(args, flag)}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "prepare":
            cmd_prepare(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "extract":
            cmd_extract(cfg, args.checkpoint)
        elif args.command == "bench":
            cmd_bench(cfg, args.annotate_sota)
        else:
            cmd_run(cfg, args.annotate_sota)
    except (ConfigError, UnknownDatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except LatentHIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
