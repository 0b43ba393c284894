import numpy as np
import pytest

from waypoint_imitation.augment import synthesize_trajectories
from waypoint_imitation.core import DESCRIPTOR_DIM, Workspace
from waypoint_imitation.datasets import collect_expert_records, pair_records
from waypoint_imitation.errors import InvalidInputError, TrainingDivergedError
from waypoint_imitation.infer.evaluate import OraclePredictor, binomial_se, evaluate
from waypoint_imitation.infer.model import (
    Architecture,
    PredictorModel,
    finest_trajectory,
    predict,
    predict_for_execution,
    to_executable,
)
from waypoint_imitation.infer.oracle import oracle_predict
from waypoint_imitation.infer.train import (
    TrainConfig,
    batch_loss_and_grad,
    direct_fit,
    naive_waypoints,
    train,
)
from waypoint_imitation.sdtw import TOTAL_WAYPOINTS
from waypoint_imitation.tasks import PickPlaceTask, ReachTask, TaskFamily

SMALL = Architecture(hidden=(16, 16))


@pytest.fixture(scope="module")
def family():
    return TaskFamily()


@pytest.fixture(scope="module")
def records(family):
    tasks = family.tasks()[:4]
    return collect_expert_records(family, tasks, episodes_per_task=12, seed=3)


@pytest.fixture(scope="module")
def samples(records):
    return pair_records(records, pairings=2, seed=0)


@pytest.fixture(scope="module")
def synth():
    return synthesize_trajectories(4, seed=1)


def test_zero_head_predicts_origin(samples):
    model = PredictorModel(SMALL, seed=0)
    v = model.view()
    v["W_task"][...] = 0.0
    v["b_task"][...] = 0.0
    out = predict(model, samples[0].demo, samples[0].instance_descriptor)
    assert out.shape == (TOTAL_WAYPOINTS, 4)
    assert not out.any()


def test_prediction_deterministic(samples):
    model = PredictorModel(SMALL, seed=1)
    a = predict(model, samples[0].demo, samples[0].instance_descriptor)
    b = predict(model, samples[0].demo, samples[0].instance_descriptor)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.isfinite(a))


def test_origin_changes_head_not_trunk(samples):
    model = PredictorModel(SMALL, seed=2)
    s = samples[0]
    X = model.features(s.demo.frames, s.instance_descriptor)[None]
    acts, out_task, out_synth = model.forward(X)
    np.testing.assert_array_equal(predict(model, s.demo, s.instance_descriptor, "task").reshape(-1), out_task[0])
    np.testing.assert_array_equal(predict(model, s.demo, s.instance_descriptor, "synthesized").reshape(-1),
                                  out_synth[0])
    assert not np.array_equal(out_task, out_synth)


def test_dimension_mismatch_rejected(samples):
    model = PredictorModel(SMALL)
    with pytest.raises(InvalidInputError):
        model.features(samples[0].demo.frames[:, :-1], samples[0].instance_descriptor)
    with pytest.raises(InvalidInputError):
        model.features(samples[0].demo.frames, np.zeros(DESCRIPTOR_DIM + 1))
    with pytest.raises(InvalidInputError):
        PredictorModel(SMALL, params=np.zeros(3))


def test_head_isolation(samples, synth):
    model = PredictorModel(SMALL, seed=3)
    cfg = TrainConfig()
    _, g_task = batch_loss_and_grad(model, samples[:3], cfg)
    assert not g_task[model.offsets("W_synth")].any() and not g_task[model.offsets("b_synth")].any()
    assert g_task[model.offsets("W_task")].any()
    _, g_synth = batch_loss_and_grad(model, synth[:3], cfg)
    assert not g_synth[model.offsets("W_task")].any() and not g_synth[model.offsets("b_task")].any()
    assert g_synth[model.offsets("W_synth")].any()


def test_gradient_matches_finite_differences(samples, synth):
    model = PredictorModel(SMALL, seed=4)
    cfg = TrainConfig()
    batch = [samples[0], samples[5], synth[0]]
    base = model.params.copy()
    _, grad = batch_loss_and_grad(model, batch, cfg, params=base)
    rng = np.random.default_rng(0)
    # parameters with a visible gradient, spread over every layer
    candidates = np.flatnonzero(np.abs(grad) > 1e-6)
    idx = rng.choice(candidates, 20, replace=False)
    h = 1e-6
    for i in idx:
        p = base.copy()
        p[i] += h
        lp, _ = batch_loss_and_grad(model, batch, cfg, params=p)
        p[i] -= 2 * h
        lm, _ = batch_loss_and_grad(model, batch, cfg, params=p)
        fd = (lp - lm) / (2 * h)
        assert abs(fd - grad[i]) <= 1e-3 * max(abs(fd), abs(grad[i])), (i, fd, grad[i])


def test_single_sample_capacity(samples):
    s = samples[0]
    cfg = TrainConfig(iterations=2000, seed=0, log_every=0)
    result = train(PredictorModel(seed=0), [s], cfg)
    net_loss, _ = batch_loss_and_grad(result.model, [s], cfg)
    _, direct = direct_fit(s.target, cfg, iterations=2000)
    assert net_loss <= direct * 1.05 + 1e-9, (net_loss, direct)


def test_training_loss_decreases_and_is_deterministic(samples):
    cfg = TrainConfig(iterations=300, learning_rate=1e-3, seed=5, log_every=0)
    a = train(PredictorModel(SMALL, seed=0), samples, cfg)
    b = train(PredictorModel(SMALL, seed=0), samples, cfg)
    np.testing.assert_array_equal(a.loss_curve, b.loss_curve)
    np.testing.assert_array_equal(a.model.params, b.model.params)
    w = len(a.loss_curve) // 10
    assert a.loss_curve[-w:].mean() < a.loss_curve[:w].mean()


def test_shuffled_pairing_control(family):
    """Wrongly paired demos give worse loss on unseen episodes than correct pairs."""
    # four tasks that differ in both object and bin
    records = collect_expert_records(family, family.tasks()[::3][:4], episodes_per_task=30, seed=3)
    train_recs = [r for i, r in enumerate(records) if i % 4 != 0]
    test_recs = [r for i, r in enumerate(records) if i % 4 == 0]
    held = pair_records(test_recs + train_recs, pairings=1, seed=9)[:len(test_recs)]
    cfg = TrainConfig(iterations=1500, learning_rate=2e-3, seed=0, log_every=0)
    losses = {}
    for shuffle in (False, True):
        data = pair_records(train_recs, pairings=5, seed=1, shuffle_tasks=shuffle)
        model = train(PredictorModel(seed=0), data, cfg).model
        losses[shuffle], _ = batch_loss_and_grad(model, held, cfg)
    assert losses[False] < losses[True], losses


def test_divergence_aborts(samples):
    model = PredictorModel(SMALL, seed=0)
    model.params[0] = np.nan
    with pytest.raises(TrainingDivergedError):
        train(model, samples[:2], TrainConfig(iterations=2, data_init=False, log_every=0))
    with pytest.raises(InvalidInputError):
        train(model, [], TrainConfig(iterations=1))


def test_config_validation():
    for kwargs in ({"learning_rate": 0.0}, {"batch_size": 0}, {"iterations": -1}, {"final_lr_fraction": 2.0}):
        with pytest.raises(InvalidInputError):
            TrainConfig(**kwargs)


def test_save_load_roundtrip(tmp_path, samples):
    model = train(PredictorModel(SMALL, seed=0), samples[:4], TrainConfig(iterations=3, log_every=0)).model
    model.save(tmp_path / "m.npz")
    loaded = PredictorModel.load(tmp_path / "m.npz")
    s = samples[1]
    np.testing.assert_array_equal(predict(model, s.demo, s.instance_descriptor),
                                  predict(loaded, s.demo, s.instance_descriptor))
    assert loaded.arch == SMALL


def test_execution_boundary(samples):
    W = np.zeros((TOTAL_WAYPOINTS, 4))
    W[:, 0] = 5.0
    W[:, 3] = np.linspace(-1, 2, TOTAL_WAYPOINTS)
    fine = finest_trajectory(W)
    assert fine.shape == (5, 4)
    wps = to_executable(fine, Workspace())
    assert all(w.position[0] == Workspace().hi[0] for w in wps)
    assert all(0.0 <= w.attributes[0] <= 1.0 for w in wps)
    out = predict_for_execution(PredictorModel(SMALL), samples[0].demo, samples[0].instance_descriptor)
    assert len(out) == 5


def test_naive_waypoints_layout():
    target = np.column_stack([np.arange(11.0), np.zeros((11, 3))])
    nw = naive_waypoints(target)
    assert nw.shape == (TOTAL_WAYPOINTS, 4)
    assert nw[0, 0] == 10.0
    np.testing.assert_array_equal(nw[10:, 0], [0, 2, 5, 8, 10])


def test_oracle_structure(family):
    scene = family.sample_scene(np.random.default_rng(0))
    wps = oracle_predict(scene, PickPlaceTask(0, 1))
    flags = [w.attributes[0] > 0.5 for w in wps]
    assert len(wps) == 5
    changes = [(a, b) for a, b in zip(flags, flags[1:]) if a != b]
    assert changes == [(False, True), (True, False)]
    reach = oracle_predict(scene, ReachTask(((0.35, 0.0, 0.25),)))
    assert all(w.attributes[0] == 0.0 for w in reach)


def test_binomial_se():
    assert binomial_se([True]) == 0.0
    assert binomial_se([True, False, True, False]) == pytest.approx(np.std([1, 0, 1, 0], ddof=1) / 2)


def test_oracle_evaluation_upper_bound(family):
    _, heldout = family.split(2, seed=0)
    report = evaluate(OraclePredictor(), heldout, episodes_per_task=20, family=family, seed=0)
    assert report.mean >= 0.95
    assert report.episodes == 40 and set(report.per_task) == {t.task_id for t in heldout}


def test_untrained_model_fails(family):
    _, heldout = family.split(2, seed=0)
    report = evaluate(PredictorModel(seed=0), heldout, episodes_per_task=20, family=family, seed=0)
    assert report.mean < 0.1
