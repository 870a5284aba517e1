"""Versioned text checkpoints for AE/VAE models and their NAP calibrations.

Layout (one record per line)::

    LHI
    version 1
    kind ae|vae
    latent_dim <int>
    beta <float>                        # vae only
    stack <name> <n_layers>
    layer <in> <out> <activation> <dropout_rate>
    w <out*in floats, row-major>
    b <out floats>
    ...
    calibration <scope> <n_rows> <rank_kept> <dim> <r>
    mu / sigma / V lines
    checksum sha256 <hex digest of every preceding byte>
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, CheckpointError, KindMismatchError, VersionMismatchError
from .models import AEModel, VAEModel
from .neuralcore import DenseLayer
from .rapp import NapCalibration

MAGIC = "LHI"
FORMAT_VERSION = 1


def _floats(a) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a).ravel())


def _stack_lines(name, layers):
    lines = [f"stack {name} {len(layers)}"]
    for L in layers:
        lines.append(f"layer {L.in_dim} {L.out_dim} {L.activation} {L.dropout_rate!r}")
        lines.append("w " + _floats(L.weights))
        lines.append("b " + _floats(L.bias))
    return lines


def _model_stacks(model):
    if isinstance(model, AEModel):
        return [("encoder", model.encoder), ("decoder", model.decoder)]
    return [
        ("encoder_trunk", model.encoder_trunk),
        ("mu_head", [model.mu_head]),
        ("logvar_head", [model.logvar_head]),
        ("decoder", model.decoder),
    ]


def dumps(model, calibrations: dict[str, NapCalibration] | None = None) -> str:
    lines = [MAGIC, f"version {FORMAT_VERSION}", f"kind {model.kind}", f"latent_dim {model.latent_dim}"]
    if isinstance(model, VAEModel):
        lines.append(f"beta {model.beta!r}")
    for name, layers in _model_stacks(model):
        lines += _stack_lines(name, layers)
    for scope in sorted(calibrations or {}):
        cal = calibrations[scope]
        dim, r = cal.V.shape
        lines.append(f"calibration {scope} {cal.n_rows} {cal.rank_kept} {dim} {r}")
        lines.append("mu " + _floats(cal.mu_X))
        lines.append("sigma " + _floats(cal.sigma))
        lines.append("V " + _floats(cal.V))
    body = "\n".join(lines) + "\n"
    return body + f"checksum sha256 {hashlib.sha256(body.encode()).hexdigest()}\n"


def save_checkpoint(model, path, calibrations=None):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(model, calibrations))
    tmp.replace(path)


def _verify(text: str) -> list[str]:
    body, sep, tail = text.rstrip("\n").rpartition("\n")
    if not sep or not tail.startswith("checksum sha256 "):
        raise ChecksumError("checkpoint has no checksum line (truncated?)")
    body += "\n"
    if hashlib.sha256(body.encode()).hexdigest() != tail.split()[-1]:
        raise ChecksumError("checkpoint checksum mismatch")
    return body.splitlines()


class _Reader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self, tag=None) -> list[str]:
        if self.pos >= len(self.lines):
            raise CheckpointError("unexpected end of checkpoint")
        parts = self.lines[self.pos].split(" ")
        self.pos += 1
        if tag is not None and parts[0] != tag:
            raise CheckpointError(f"expected {tag!r} record, found {parts[0]!r} at line {self.pos}")
        return parts

    def floats(self, tag, shape):
        vals = np.array([float(v) for v in self.next(tag)[1:]], dtype=np.float64)
        if vals.size != int(np.prod(shape)):
            raise CheckpointError(f"{tag!r} record has {vals.size} values, expected shape {shape}")
        return vals.reshape(shape)

    def done(self):
        return self.pos >= len(self.lines)


def _read_stack(rd: _Reader, name):
    _, got, n = rd.next("stack")
    if got != name:
        raise CheckpointError(f"expected stack {name!r}, found {got!r}")
    layers = []
    for _ in range(int(n)):
        _, din, dout, act, rate = rd.next("layer")
        din, dout = int(din), int(dout)
        w = rd.floats("w", (dout, din))
        b = rd.floats("b", (dout,))
        layers.append(DenseLayer(w, b, act, float(rate)))
    return layers


def _parse(path):
    text = Path(path).read_text()
    lines = _verify(text)
    rd = _Reader(lines)
    if rd.next()[0] != MAGIC:
        raise CheckpointError("not an LHI checkpoint")
    version = int(rd.next("version")[1])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    kind = rd.next("kind")[1]
    latent = int(rd.next("latent_dim")[1])
    if kind == "ae":
        model = AEModel(_read_stack(rd, "encoder"), _read_stack(rd, "decoder"), latent)
    elif kind == "vae":
        beta = float(rd.next("beta")[1])
        trunk = _read_stack(rd, "encoder_trunk")
        mu = _read_stack(rd, "mu_head")[0]
        lv = _read_stack(rd, "logvar_head")[0]
        model = VAEModel(trunk, mu, lv, _read_stack(rd, "decoder"), latent, beta)
    else:
        raise CheckpointError(f"unknown model kind {kind!r}")
    cals = {}
    while not rd.done():
        _, scope, n_rows, rank, dim, r = rd.next("calibration")
        dim, r = int(dim), int(r)
        mu = rd.floats("mu", (dim,))
        sigma = rd.floats("sigma", (r,))
        V = rd.floats("V", (dim, r))
        cals[scope] = NapCalibration(scope, mu, V, sigma, int(rank), int(n_rows))
    return model, cals


def load_checkpoint(path, kind: str | None = None):
    """Load a model; ``kind`` ('ae' or 'vae') makes a schema mismatch an error."""
    model, _ = _parse(path)
    if kind is not None and model.kind != kind:
        raise KindMismatchError(f"checkpoint holds a {model.kind} model, {kind} requested")
    return model


def load_calibrations(path) -> dict[str, NapCalibration]:
    return _parse(path)[1]
