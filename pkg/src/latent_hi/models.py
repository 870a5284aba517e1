"""Dense autoencoder and beta-VAE built on :mod:`neuralcore`."""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from . import neuralcore as nc
from .errors import ShapeError, TrainingError
from .neuralcore import DenseLayer

log = logging.getLogger(__name__)

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0
DEFAULT_HIDDEN = (32, 16)
DEFAULT_LATENT = 8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    dropout_rate: float = 0.1
    seed: int = 0
    beta: float = 1.0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        if not 0 <= self.dropout_rate < 1 or self.beta < 0:
            raise ValueError("dropout_rate must lie in [0, 1) and beta >= 0")


@dataclass
class AEModel:
    encoder: list[DenseLayer]
    decoder: list[DenseLayer]
    latent_dim: int
    kind = "ae"

    def __post_init__(self):
        if self.encoder[-1].out_dim != self.latent_dim or self.decoder[0].in_dim != self.latent_dim:
            raise ShapeError("encoder output / decoder input must equal latent_dim")
        if self.decoder[-1].out_dim != self.encoder[0].in_dim:
            raise ShapeError("decoder output dim must equal input dim")

    @property
    def input_dim(self) -> int:
        return self.encoder[0].in_dim

    @property
    def layers(self) -> list[DenseLayer]:
        return self.encoder + self.decoder


@dataclass
class VAEModel:
    encoder_trunk: list[DenseLayer]
    mu_head: DenseLayer
    logvar_head: DenseLayer
    decoder: list[DenseLayer]
    latent_dim: int
    beta: float = 1.0
    kind = "vae"

    def __post_init__(self):
        trunk_out = self.encoder_trunk[-1].out_dim
        if self.mu_head.in_dim != trunk_out or self.logvar_head.in_dim != trunk_out:
            raise ShapeError("latent heads must consume the trunk output")
        if self.mu_head.out_dim != self.latent_dim or self.logvar_head.out_dim != self.latent_dim:
            raise ShapeError("latent heads must output latent_dim values")
        if self.decoder[0].in_dim != self.latent_dim or self.decoder[-1].out_dim != self.input_dim:
            raise ShapeError("decoder must map latent_dim back to the input dim")

    @property
    def input_dim(self) -> int:
        return self.encoder_trunk[0].in_dim

    @property
    def layers(self) -> list[DenseLayer]:
        return self.encoder_trunk + [self.mu_head, self.logvar_head] + self.decoder


def _stack(dims, rng, dropout_rate, last_activation):
    layers = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        last = i == len(dims) - 2
        layers.append(
            nc.glorot_layer(a, b, rng, last_activation if last else "tanh", 0.0 if last else dropout_rate)
        )
    return layers


def build_ae(input_dim, hidden=DEFAULT_HIDDEN, latent_dim=DEFAULT_LATENT, dropout_rate=0.1, seed=0) -> AEModel:
    rng = np.random.default_rng(seed)
    enc = _stack([input_dim, *hidden, latent_dim], rng, dropout_rate, "identity")
    dec = _stack([latent_dim, *reversed(hidden), input_dim], rng, dropout_rate, "identity")
    return AEModel(enc, dec, latent_dim)


def build_vae(
    input_dim, hidden=DEFAULT_HIDDEN, latent_dim=DEFAULT_LATENT, dropout_rate=0.1, beta=1.0, seed=0
) -> VAEModel:
    rng = np.random.default_rng(seed)
    trunk = _stack([input_dim, *hidden], rng, dropout_rate, "tanh")
    trunk[-1].dropout_rate = dropout_rate
    mu = nc.glorot_layer(hidden[-1], latent_dim, rng, "identity")
    logvar = nc.glorot_layer(hidden[-1], latent_dim, rng, "identity")
    dec = _stack([latent_dim, *reversed(hidden), input_dim], rng, dropout_rate, "identity")
    return VAEModel(trunk, mu, logvar, dec, latent_dim, beta)


def with_dropout(layers, rate, hidden_only=True) -> list[DenseLayer]:
    """Copies of ``layers`` whose hidden layers (all but the last) use ``rate``."""
    out = []
    for i, layer in enumerate(layers):
        hidden = i < len(layers) - 1
        out.append(layer.copy(dropout_rate=rate if (hidden or not hidden_only) else 0.0))
    return out


# ---------------------------------------------------------------- AE paths


def ae_encode(model: AEModel, x, dropout_on=False, rng=None):
    return nc.forward(model.encoder, x, dropout_on, rng)


def ae_reconstruct(model: AEModel, x, dropout_on=False, rng=None):
    """x -> x_hat through encoder and decoder; the trace spans both stacks."""
    return nc.forward(model.layers, x, dropout_on, rng)


def ae_loss_and_grads(model: AEModel, X, dropout_on=False, rng=None):
    """Mean squared reconstruction error over batch and features, with parameter gradients."""
    X = np.atleast_2d(X)
    xhat, trace = ae_reconstruct(model, X, dropout_on, rng)
    r = xhat - X
    loss = float(np.mean(r * r))
    grads, _ = nc.backward(model.layers, trace, 2.0 * r / r.size)
    return loss, nc.flatten_grads(grads)


# ---------------------------------------------------------------- VAE paths


def _logvar(raw):
    return np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)


def vae_encode(model: VAEModel, x, sample=False, rng=None, dropout_on=False):
    """Returns (z, mu, logvar). Without sampling z is mu and no randomness is consumed."""
    h, _ = nc.forward(model.encoder_trunk, x, dropout_on, rng)
    mu, _ = nc.forward([model.mu_head], h)
    logvar = _logvar(nc.forward([model.logvar_head], h)[0])
    if not sample:
        return mu, mu, logvar
    eps = rng.standard_normal(np.shape(mu))
    return mu + np.exp(0.5 * logvar) * eps, mu, logvar


def vae_decode(model: VAEModel, z, dropout_on=False, rng=None):
    return nc.forward(model.decoder, z, dropout_on, rng)


def kl_term(mu, logvar):
    """Per-row KL(N(mu, e^logvar) || N(0, I)) summed over latent dims."""
    mu = np.asarray(mu)
    logvar = np.asarray(logvar)
    return 0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar, axis=-1)


def recon_term(x, xhat):
    """Per-row Gaussian negative log-likelihood with unit variance, constants dropped."""
    r = np.asarray(xhat) - np.asarray(x)
    return 0.5 * np.sum(r * r, axis=-1)


def vae_loss(model: VAEModel, x, rng, dropout_on=False):
    """Single-sample ELBO estimate: (loss, recon_term, kl_term), batch-averaged."""
    z, mu, logvar = vae_encode(model, x, sample=True, rng=rng, dropout_on=dropout_on)
    xhat, _ = vae_decode(model, z, dropout_on, rng)
    rec = float(np.mean(recon_term(x, xhat)))
    kl = float(np.mean(kl_term(mu, logvar)))
    loss = rec + model.beta * kl
    if not np.isfinite(loss):
        raise TrainingError("non-finite VAE loss")
    return loss, rec, kl


def vae_loss_and_grads(model: VAEModel, X, rng, dropout_on=False, eps=None):
    """Loss terms of :func:`vae_loss` plus gradients for ``model.layers``.

    ``eps`` pins the reparameterization noise (used by gradient checks).
    """
    X = np.atleast_2d(X)
    n = X.shape[0]
    h, trunk_tr = nc.forward(model.encoder_trunk, X, dropout_on, rng)
    mu, mu_tr = nc.forward([model.mu_head], h)
    raw, lv_tr = nc.forward([model.logvar_head], h)
    logvar = _logvar(raw)
    if eps is None:
        eps = rng.standard_normal(mu.shape)
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    xhat, dec_tr = nc.forward(model.decoder, z, dropout_on, rng)

    rec = float(np.mean(recon_term(X, xhat)))
    kl = float(np.mean(kl_term(mu, logvar)))
    loss = rec + model.beta * kl

    dec_grads, dz = nc.backward(model.decoder, dec_tr, (xhat - X) / n)
    dmu = dz + model.beta * mu / n
    dlv = dz * eps * 0.5 * std + model.beta * 0.5 * (np.exp(logvar) - 1.0) / n
    dlv = dlv * ((raw >= LOGVAR_MIN) & (raw <= LOGVAR_MAX))
    mu_grads, dh_mu = nc.backward([model.mu_head], mu_tr, dmu)
    lv_grads, dh_lv = nc.backward([model.logvar_head], lv_tr, dlv)
    trunk_grads, _ = nc.backward(model.encoder_trunk, trunk_tr, dh_mu + dh_lv)
    grads = nc.flatten_grads(trunk_grads + mu_grads + lv_grads + dec_grads)
    return (loss, rec, kl), grads


# ---------------------------------------------------------------- training


@dataclass
class LossCurve:
    loss: list[float] = field(default_factory=list)
    recon: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)


def _apply_train_dropout(model, rate):
    if isinstance(model, AEModel):
        model.encoder = with_dropout(model.encoder, rate)
        model.decoder = with_dropout(model.decoder, rate)
    else:
        model.encoder_trunk = with_dropout(model.encoder_trunk, rate, hidden_only=False)
        model.decoder = with_dropout(model.decoder, rate)


def train(model, healthy, cfg: TrainConfig):
    """Mini-batch Adam on the healthy samples. Returns (trained copy, LossCurve)."""
    from .preprocess import stack_x

    X = healthy if isinstance(healthy, np.ndarray) else stack_x(healthy)
    if X.shape[0] == 0:
        raise TrainingError("training set is empty")
    if X.shape[1] != model.input_dim:
        raise ShapeError(f"samples have dim {X.shape[1]}, model expects {model.input_dim}")

    model = copy.deepcopy(model)
    curve = LossCurve()
    if cfg.epochs == 0:
        return model, curve
    _apply_train_dropout(model, cfg.dropout_rate)
    is_vae = isinstance(model, VAEModel)
    if is_vae:
        model.beta = cfg.beta

    rng = np.random.default_rng(cfg.seed)
    layers = model.layers
    params = nc.layer_params(layers)
    state = nc.AdamState.for_params(params, learning_rate=cfg.learning_rate)
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        tot = np.zeros(3)
        for start in range(0, n, cfg.batch_size):
            xb = X[perm[start : start + cfg.batch_size]]
            if is_vae:
                terms, grads = vae_loss_and_grads(model, xb, rng, dropout_on=True)
            else:
                loss, grads = ae_loss_and_grads(model, xb, dropout_on=True, rng=rng)
                terms = (loss, loss, 0.0)
            if not np.isfinite(terms[0]):
                raise TrainingError(f"loss became non-finite at epoch {epoch}")
            try:
                params, state = nc.adam_step(params, grads, state)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from None
            nc.set_layer_params(layers, params)
            tot += np.asarray(terms) * xb.shape[0]
        tot /= n
        curve.loss.append(float(tot[0]))
        curve.recon.append(float(tot[1]))
        curve.kl.append(float(tot[2]))
        log.debug("epoch %d loss %.6f", epoch, tot[0])
    return model, curve
