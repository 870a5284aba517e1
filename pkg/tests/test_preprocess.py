import numpy as np
import pytest

from latent_hi.cmapss import Trajectory
from latent_hi.errors import LatentHIError
from latent_hi.preprocess import (
    LabelConfig, denormalize, fit_normalization, healthy_subset, make_samples, normalize,
)
from latent_hi.synthetic import CONDITIONS, write_synthetic_cmapss
from latent_hi.cmapss import load_split

from conftest import make_traj


@pytest.fixture
def trajs():
    return [make_traj(i, 30 + 5 * i) for i in range(1, 6)]


def test_constant_sensors_dropped_against_direct_std(trajs):
    model = fit_normalization(trajs, 1)
    sensors = np.concatenate([t.sensors for t in trajs])
    oracle = [j for j in range(21) if sensors[:, j].std() >= 1e-8]
    assert list(model.kept_sensor_indices) == oracle
    assert 0 not in model.kept_sensor_indices and model.n_features < 21


def test_single_cluster_centroid_is_column_mean(trajs):
    model = fit_normalization(trajs, 1)
    settings = np.concatenate([t.settings for t in trajs])
    np.testing.assert_allclose(model.condition_centroids[0], settings.mean(axis=0), atol=1e-12)


def test_per_cluster_zscore_statistics(trajs):
    model = fit_normalization(trajs, 1)
    z = np.concatenate([normalize(t, model) for t in trajs])
    assert np.all(np.isfinite(z))
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-8)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-6)


def test_six_conditions_found(tmp_path):
    write_synthetic_cmapss(tmp_path, "FD002", n_train=30, n_test=5, seed=2)
    split = load_split(tmp_path, "FD002")
    model = fit_normalization(split.train, 6, seed=0)
    assert model.n_conditions == 6
    labels = model.assign(np.concatenate([t.settings for t in split.train]))
    assert len(np.unique(labels)) == 6
    # centroids recover the regimes up to noise
    for c in CONDITIONS:
        assert np.min(np.abs(model.condition_centroids - c).sum(axis=1)) < 0.05
    z = np.concatenate([normalize(t, model) for t in split.train])
    for c in range(6):
        rows = z[labels == c]
        live = model.per_condition_std[c] > 1e-6  # floored columns are constant within the regime
        assert live.sum() >= 10
        np.testing.assert_allclose(rows.mean(axis=0)[live], 0, atol=1e-8)
        np.testing.assert_allclose(rows.std(axis=0)[live], 1, atol=1e-6)


def test_kmeans_same_seed_same_model(tmp_path):
    write_synthetic_cmapss(tmp_path, "FD004", n_train=10, n_test=2, seed=4)
    split = load_split(tmp_path, "FD004")
    a = fit_normalization(split.train, 6, seed=5)
    b = fit_normalization(split.train, 6, seed=5)
    np.testing.assert_array_equal(a.condition_centroids, b.condition_centroids)


def test_impossible_clustering_raises():
    # all settings identical -> k-means cannot fill 3 clusters
    t = Trajectory(1, np.tile([1.0, 2.0, 3.0], (10, 1)), np.random.default_rng(0).normal(size=(10, 21)))
    with pytest.raises(LatentHIError):
        fit_normalization([t], 3)


def test_zscore_values(trajs):
    model = fit_normalization(trajs, 1)
    j = 3
    mean, std = model.per_condition_mean[0], model.per_condition_std[0]
    row = trajs[0].sensors[:1].copy()
    row[0, list(model.kept_sensor_indices)] = mean
    t = Trajectory(9, trajs[0].settings[:1], row)
    np.testing.assert_allclose(normalize(t, model), 0, atol=1e-12)
    row[0, model.kept_sensor_indices[j]] = mean[j] + 2 * std[j]
    assert normalize(Trajectory(9, t.settings, row), model)[0, j] == pytest.approx(2.0)


def test_denormalize_round_trip(trajs):
    model = fit_normalization(trajs, 1)
    t = trajs[2]
    back = denormalize(normalize(t, model), t.settings, model)
    np.testing.assert_allclose(back, t.sensors[:, list(model.kept_sensor_indices)], atol=1e-10)


def test_normalization_serialization(tmp_path, trajs):
    model = fit_normalization(trajs, 1)
    model.save(tmp_path / "n.json")
    back = type(model).load(tmp_path / "n.json")
    np.testing.assert_array_equal(back.per_condition_std, model.per_condition_std)
    assert back.kept_sensor_indices == model.kept_sensor_indices


def test_labels_clip_and_failure():
    t = make_traj(1, 200)
    model = fit_normalization([t], 1)
    s = make_samples(t, model, LabelConfig())
    assert s[199].rul_label == 0 and s[199].cycle == 200
    assert s[9].rul_label == 125 and s[9].true_rul == 190
    labels = [x.rul_label for x in s]
    assert all(a >= b for a, b in zip(labels, labels[1:]))


def test_test_labels_need_true_rul():
    t = make_traj(1, 50)
    model = fit_normalization([t], 1)
    with pytest.raises(LatentHIError):
        make_samples(t, model, LabelConfig(), kind="test")
    s = make_samples(t, model, LabelConfig(), true_rul_at_end=30, kind="test")
    assert s[-1].rul_label == 30 and s[0].rul_label == 79


def test_window_padding():
    t = make_traj(1, 10)
    model = fit_normalization([t], 1)
    S = model.n_features
    s = make_samples(t, model, LabelConfig(), window=3)
    assert s[0].x.shape == (3 * S,)
    assert np.all(s[0].x[: 2 * S] == 0)
    z = normalize(t, model)
    np.testing.assert_array_equal(s[4].x, z[2:5].ravel())


def _units(lengths):
    out = []
    for i, n in enumerate(lengths, start=1):
        t = make_traj(i, n)
        out.append(t)
    model = fit_normalization(out, 1)
    return [x for t in out for x in make_samples(t, model, LabelConfig())]


def test_healthy_subset_threshold_oracle():
    samples = _units([300])
    chosen = healthy_subset(samples, LabelConfig())
    oracle = [c for c in range(1, 301) if 300 - c > 125]
    assert [s.cycle for s in chosen] == oracle == list(range(1, 175))


def test_healthy_subset_fallback():
    chosen = healthy_subset(_units([100]), LabelConfig())
    assert [s.cycle for s in chosen] == list(range(1, 21))


def test_healthy_subset_threshold_zero():
    samples = _units([40])
    chosen = healthy_subset(samples, LabelConfig(healthy_rul_threshold=0.0))
    assert [s.cycle for s in chosen] == list(range(1, 40))


def test_every_unit_contributes():
    samples = _units([300, 90, 130])
    chosen = healthy_subset(samples, LabelConfig())
    assert {s.unit_id for s in chosen} == {1, 2, 3}
    assert all(any(s is c for c in samples) for s in chosen)
