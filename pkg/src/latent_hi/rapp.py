"""Reconstruction-along-pathway health indicators (REC, SAP, NAP and latent-only variants).

A pathway difference for an input x is the concatenation, over in-scope
encoder layers, of h_i(x) - h_i(x_hat) where x_hat is the deterministic
reconstruction fed back through the encoder.  SAP is its Euclidean norm;
NAP is the same norm after whitening with statistics collected on healthy
training data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neuralcore as nc
from .errors import CalibrationError, ShapeError
from .models import AEModel, VAEModel

ENCODER_ALL_HIDDEN = "encoder_all_hidden"
LATENT_ONLY = "latent_only"
SCOPES = (ENCODER_ALL_HIDDEN, LATENT_ONLY)
RAPP_CHANNELS = ("rec", "sap", "nap", "sap_ls", "nap_ls")
SIGMA_TOL = 1e-10


def _check_scope(scope):
    if scope not in SCOPES:
        raise ValueError(f"unknown pathway scope {scope!r}")


def encoder_activations(model, X) -> list[np.ndarray]:
    """Post-activations of every encoder layer, ending with the latent code (mu for a VAE)."""
    if isinstance(model, AEModel):
        _, trace = nc.forward(model.encoder, X)
        return trace.post
    h, trace = nc.forward(model.encoder_trunk, X)
    mu, _ = nc.forward([model.mu_head], h)
    return trace.post + [mu]


def reconstruct(model, X) -> np.ndarray:
    """Deterministic reconstruction: dropout off, z = mu for the VAE."""
    if isinstance(model, AEModel):
        z, _ = nc.forward(model.encoder, X)
    elif isinstance(model, VAEModel):
        h, _ = nc.forward(model.encoder_trunk, X)
        z, _ = nc.forward([model.mu_head], h)
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")
    xhat, _ = nc.forward(model.decoder, z)
    return xhat


def _select(acts, scope):
    return acts[-1] if scope == LATENT_ONLY else np.concatenate(acts, axis=-1)


def pathway_diff(model, x, scope=ENCODER_ALL_HIDDEN, xhat=None) -> np.ndarray:
    """h(x) - h(x_hat) over the layers in ``scope``; rows for a batch, 1-D for one input."""
    _check_scope(scope)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ShapeError(f"input dim {x.shape[-1]} != model input dim {model.input_dim}")
    single = x.ndim == 1
    X = np.atleast_2d(x)
    xhat = reconstruct(model, X) if xhat is None else np.atleast_2d(xhat)
    d = _select(encoder_activations(model, X), scope) - _select(encoder_activations(model, xhat), scope)
    return d[0] if single else d


def eps_sap(d) -> np.ndarray | float:
    out = np.linalg.norm(np.asarray(d, dtype=np.float64), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class NapCalibration:
    scope: str
    mu_X: np.ndarray  # (dim,)
    V: np.ndarray  # (dim, r) right singular vectors, columns ordered like sigma
    sigma: np.ndarray  # (r,) non-increasing
    rank_kept: int
    n_rows: int

    @property
    def scale(self) -> np.ndarray:
        """Per-component standard deviation of the calibration diffs (n-1 convention)."""
        return self.sigma[: self.rank_kept] / np.sqrt(self.n_rows - 1)

    def whiten(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        if d.shape[-1] != self.mu_X.shape[0]:
            raise ShapeError(f"diff dim {d.shape[-1]} != calibration dim {self.mu_X.shape[0]}")
        k = self.rank_kept
        return ((d - self.mu_X) @ self.V[:, :k]) / self.scale


def calibrate_nap(diffs, scope=ENCODER_ALL_HIDDEN) -> NapCalibration:
    D = np.atleast_2d(np.asarray(diffs, dtype=np.float64))
    n, dim = D.shape
    if n < 2 or dim < 1:
        raise CalibrationError(f"NAP calibration needs >= 2 rows and >= 1 column, got {D.shape}")
    mu = D.mean(axis=0)
    _, sigma, vt = np.linalg.svd(D - mu, full_matrices=False)
    smax = sigma[0] if sigma.size else 0.0
    rank = int(np.sum(sigma > SIGMA_TOL * smax)) if smax > 0 else 0
    return NapCalibration(scope, mu, vt.T.copy(), sigma, rank, n)


def eps_nap(d, cal: NapCalibration) -> np.ndarray | float:
    d = np.asarray(d, dtype=np.float64)
    if cal.rank_kept == 0:
        if d.shape[-1] != cal.mu_X.shape[0]:
            raise ShapeError(f"diff dim {d.shape[-1]} != calibration dim {cal.mu_X.shape[0]}")
        out = np.zeros(d.shape[:-1])
    else:
        out = np.linalg.norm(cal.whiten(d), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def calibrate_model(model, X_healthy) -> dict[str, NapCalibration]:
    xhat = reconstruct(model, X_healthy)
    return {s: calibrate_nap(pathway_diff(model, X_healthy, s, xhat=xhat), s) for s in SCOPES}


def extract_rapp_series(model, unit_samples, cals: dict[str, NapCalibration]) -> dict[str, np.ndarray]:
    """Per-cycle rec, sap, nap, sap_ls and nap_ls for one unit's samples (rows)."""
    from .preprocess import stack_x

    missing = [s for s in SCOPES if s not in cals]
    if missing:
        raise CalibrationError(f"missing NAP calibration for scope(s) {missing}")
    X = unit_samples if isinstance(unit_samples, np.ndarray) else stack_x(unit_samples)
    xhat = reconstruct(model, X)
    d_all = pathway_diff(model, X, ENCODER_ALL_HIDDEN, xhat=xhat)
    d_ls = pathway_diff(model, X, LATENT_ONLY, xhat=xhat)
    return {
        "rec": np.linalg.norm(X - xhat, axis=1),
        "sap": eps_sap(d_all),
        "nap": eps_nap(d_all, cals[ENCODER_ALL_HIDDEN]),
        "sap_ls": eps_sap(d_ls),
        "nap_ls": eps_nap(d_ls, cals[LATENT_ONLY]),
    }
