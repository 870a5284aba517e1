"""Monte Carlo uncertainty of the reconstruction error.

Epistemic spread comes from dropout on the decoder's hidden layers with the
latent code held fixed; aleatoric spread (VAE only) comes from sampling
z ~ q(z|x) with dropout off.  Each pass yields a scalar reconstruction error
and the reported sigma is its sample standard deviation across passes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import neuralcore as nc
from .errors import ConfigError
from .models import AEModel, VAEModel, vae_encode, with_dropout

DROPOUT_STREAM = 0
LATENT_STREAM = 1


@dataclass(frozen=True)
class UQConfig:
    n_passes: int = 50
    dropout_rate: float = 0.1
    seed: int = 0
    latent_seed: int | None = None  # defaults to ``seed``

    def validate(self):
        if self.n_passes < 2:
            raise ConfigError(f"n_passes must be >= 2, got {self.n_passes}")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    def dropout_rng(self, *key) -> np.random.Generator:
        return np.random.default_rng([self.seed, DROPOUT_STREAM, *key])

    def latent_rng(self, *key) -> np.random.Generator:
        seed = self.seed if self.latent_seed is None else self.latent_seed
        return np.random.default_rng([seed, LATENT_STREAM, *key])


@dataclass(frozen=True)
class UQResult:
    mean_rec: float
    sigma: float
    kind: Literal["aleatoric", "epistemic", "total"]


def _spread(errors: np.ndarray) -> np.ndarray:
    """Row-wise sample std (n-1); exactly 0 for rows of identical values."""
    sd = errors.std(axis=1, ddof=1)
    sd[np.ptp(errors, axis=1) == 0] = 0.0
    return sd


def _decode_errors(model, X, Z, n_passes, dropout_rate, rng):
    """Decode each latent row ``n_passes`` times; returns (n, n_passes) reconstruction errors."""
    n = X.shape[0]
    if Z.ndim == 2:
        Z = np.repeat(Z, n_passes, axis=0)
    else:
        Z = Z.reshape(n * n_passes, -1)
    dropout_on = rng is not None
    decoder = with_dropout(model.decoder, dropout_rate) if dropout_on else model.decoder
    xhat, _ = nc.forward(decoder, Z, dropout_on, rng)
    Xr = np.repeat(X, n_passes, axis=0)
    return np.linalg.norm(Xr - xhat, axis=1).reshape(n, n_passes)


def epistemic_errors(model, X, cfg: UQConfig, rng) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if isinstance(model, AEModel):
        z, _ = nc.forward(model.encoder, X)
    else:
        z, _, _ = vae_encode(model, X, sample=False)
    return _decode_errors(model, X, z, cfg.n_passes, cfg.dropout_rate, rng)


def aleatoric_errors(model: VAEModel, X, cfg: UQConfig, rng) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, mu, logvar = vae_encode(model, X, sample=False)
    eps = rng.standard_normal((X.shape[0], cfg.n_passes, model.latent_dim))
    Z = mu[:, None, :] + np.exp(0.5 * logvar)[:, None, :] * eps
    return _decode_errors(model, X, Z, cfg.n_passes, 0.0, None)


def _result(errors, kind) -> UQResult:
    return UQResult(float(errors.mean()), float(_spread(errors)[0]), kind)


def epistemic_ae(model: AEModel, x, cfg: UQConfig) -> UQResult:
    cfg.validate()
    return _result(epistemic_errors(model, x, cfg, cfg.dropout_rng()), "epistemic")


def epistemic_vae(model: VAEModel, x, cfg: UQConfig) -> UQResult:
    cfg.validate()
    return _result(epistemic_errors(model, x, cfg, cfg.dropout_rng()), "epistemic")


def aleatoric_vae(model: VAEModel, x, cfg: UQConfig) -> UQResult:
    cfg.validate()
    return _result(aleatoric_errors(model, x, cfg, cfg.latent_rng()), "aleatoric")


def uq_channels(model) -> tuple[str, ...]:
    return ("sigma_a", "sigma_e") if isinstance(model, VAEModel) else ("sigma_e",)


def extract_uq_series(model, unit_samples, cfg: UQConfig, unit_id: int = 0) -> dict[str, np.ndarray]:
    """Per-cycle sigma_e (AE) or sigma_a and sigma_e (VAE) for one unit.

    Random streams are keyed by (seed, source, unit_id) so units can be
    processed in any order.
    """
    from .preprocess import stack_x

    cfg.validate()
    X = unit_samples if isinstance(unit_samples, np.ndarray) else stack_x(unit_samples)
    out = {}
    if isinstance(model, VAEModel):
        out["sigma_a"] = _spread(aleatoric_errors(model, X, cfg, cfg.latent_rng(unit_id)))
    out["sigma_e"] = _spread(epistemic_errors(model, X, cfg, cfg.dropout_rng(unit_id)))
    return out
