import numpy as np
import pytest

from latent_hi import neuralcore as nc
from latent_hi.errors import ShapeError
from latent_hi.models import (
    AEModel, LOGVAR_MIN, TrainConfig, VAEModel, ae_loss_and_grads, ae_reconstruct, build_ae, build_vae,
    kl_term, train, vae_encode, vae_loss, vae_loss_and_grads,
)
from latent_hi.neuralcore import DenseLayer

from gradcheck import max_rel_error, numeric_grads


def eye(n, act="identity"):
    return DenseLayer(np.eye(n), np.zeros(n), act)


def test_identity_ae_reconstructs_exactly():
    m = AEModel([eye(3), eye(3)], [eye(3)], 3)
    x = np.array([1.0, -2.0, 0.5])
    xhat, trace = ae_reconstruct(m, x)
    np.testing.assert_array_equal(xhat, x)
    assert len(trace.post) == 3


def test_ae_dimension_invariants():
    with pytest.raises(ShapeError):
        AEModel([eye(3)], [DenseLayer(np.ones((2, 3)), np.zeros(2))], 3)


def test_deterministic_reconstruct():
    m = build_ae(6, seed=1)
    x = np.random.default_rng(0).normal(size=6)
    np.testing.assert_array_equal(ae_reconstruct(m, x)[0], ae_reconstruct(m, x)[0])


def test_vae_encode_deterministic_path_consumes_no_randomness():
    m = build_vae(5, seed=2)
    x = np.random.default_rng(0).normal(size=(4, 5))
    rng = np.random.default_rng(9)
    state = rng.bit_generator.state
    z, mu, _ = vae_encode(m, x, sample=False, rng=rng)
    np.testing.assert_array_equal(z, mu)
    assert rng.bit_generator.state == state


def test_logvar_clamped():
    m = build_vae(3, seed=0)
    m.logvar_head.bias[:] = -1e6
    z, mu, lv = vae_encode(m, np.ones(3), sample=True, rng=np.random.default_rng(0))
    assert np.all(lv == LOGVAR_MIN) and np.all(np.isfinite(z))


def test_reparameterized_std_matches_closed_form():
    m = build_vae(4, latent_dim=3, seed=5)
    m.logvar_head.bias[:] = [-1.0, 0.0, 0.7]
    x = np.tile(np.random.default_rng(1).normal(size=4), (100_000, 1))
    z, mu, lv = vae_encode(m, x, sample=True, rng=np.random.default_rng(2))
    np.testing.assert_allclose(z.std(axis=0), np.exp(lv[0] / 2), rtol=0.02)


def test_kl_closed_forms():
    assert kl_term(np.zeros(4), np.zeros(4)) == 0.0
    assert kl_term(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5)


def test_kl_non_negative_on_random_pairs():
    rng = np.random.default_rng(0)
    mu = rng.normal(scale=3, size=(10_000, 1))
    lv = rng.uniform(-10, 10, size=(10_000, 1))
    assert np.all(kl_term(mu, lv) >= 0)


def test_beta_zero_loss_is_recon():
    m = build_vae(5, beta=0.0, seed=3)
    x = np.random.default_rng(0).normal(size=(8, 5))
    loss, rec, kl = vae_loss(m, x, np.random.default_rng(1))
    assert loss == rec and kl > 0


def test_ae_gradcheck():
    m = build_ae(4, hidden=(5, 3), latent_dim=2, seed=3)
    X = np.random.default_rng(1).normal(size=(6, 4))
    _, grads = ae_loss_and_grads(m, X)
    num = numeric_grads(lambda: ae_loss_and_grads(m, X)[0], nc.layer_params(m.layers))
    assert max_rel_error(grads, num) < 1e-4


def test_vae_gradcheck_includes_kl():
    m = build_vae(4, hidden=(5, 3), latent_dim=2, beta=0.7, seed=4)
    m.mu_head.bias[:] = [0.4, -0.3]
    m.logvar_head.bias[:] = [0.2, -0.5]
    X = np.random.default_rng(1).normal(size=(6, 4))
    eps = np.random.default_rng(2).normal(size=(6, 2))

    def f():
        return vae_loss_and_grads(m, X, None, eps=eps)[0][0]

    (loss, rec, kl), grads = vae_loss_and_grads(m, X, None, eps=eps)
    assert kl > 0 and loss == pytest.approx(rec + 0.7 * kl)
    num = numeric_grads(f, nc.layer_params(m.layers))
    assert max_rel_error(grads, num) < 1e-4


def test_zero_epochs_is_noop():
    m = build_ae(3, seed=0)
    out, curve = train(m, np.ones((10, 3)), TrainConfig(epochs=0))
    for a, b in zip(nc.layer_params(m.layers), nc.layer_params(out.layers)):
        np.testing.assert_array_equal(a, b)
    assert curve.loss == []


def test_constant_target_is_learned():
    x = np.tile([0.5, -1.0, 2.0, 0.0], (50, 1))
    m = build_ae(4, hidden=(8, 4), latent_dim=2, seed=0)
    out, curve = train(m, x, TrainConfig(epochs=300, batch_size=10, learning_rate=1e-2, dropout_rate=0.0))
    xhat, _ = ae_reconstruct(out, x)
    assert np.mean((xhat - x) ** 2) < 1e-3
    assert curve.loss[-1] < curve.loss[0]


def test_training_is_seed_deterministic():
    X = np.random.default_rng(0).normal(size=(64, 5))
    cfg = TrainConfig(epochs=3, batch_size=16, seed=11)
    for build in (build_ae, build_vae):
        a, ca = train(build(5, seed=1), X, cfg)
        b, cb = train(build(5, seed=1), X, cfg)
        for p, q in zip(nc.layer_params(a.layers), nc.layer_params(b.layers)):
            np.testing.assert_array_equal(p, q)
        assert ca.loss == cb.loss


def test_vae_training_reduces_loss_and_records_terms():
    X = np.random.default_rng(0).normal(size=(200, 6)) @ np.random.default_rng(1).normal(size=(6, 6))
    out, curve = train(build_vae(6, seed=0), X, TrainConfig(epochs=30, batch_size=32, learning_rate=3e-3))
    assert curve.loss[-1] < curve.loss[0]
    assert len(curve.kl) == 30 and all(k >= 0 for k in curve.kl)
    assert isinstance(out, VAEModel)


def test_empty_training_set_rejected():
    from latent_hi.errors import TrainingError

    with pytest.raises(TrainingError):
        train(build_ae(3), np.empty((0, 3)), TrainConfig())
