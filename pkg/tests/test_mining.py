import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waypoint_imitation.core import RobotLog
from waypoint_imitation.errors import InvalidInputError
from waypoint_imitation.mining import (
    PRESETS,
    MiningConfig,
    log_to_attributed_trajectory,
    mine_grasp_attribute,
    mine_press_attribute,
    mine_trajectory,
    precision_recall,
    raw_grasp_attribute,
    raw_press_attribute,
    smooth,
)
from waypoint_imitation.sim.expert import generate_expert_episode
from waypoint_imitation.sim.world import Simulator, attachment_labels
from waypoint_imitation.tasks import TaskFamily


def make_log(T, gap=None, close=None, ee=None, dee=None):
    gap = np.full(T, 0.08) if gap is None else np.asarray(gap, float)
    close = np.zeros(T, bool) if close is None else np.asarray(close, bool)
    ee = np.zeros((T, 3)) if ee is None else np.asarray(ee, float)
    dee = np.zeros((T, 3)) if dee is None else np.asarray(dee, float)
    return RobotLog(np.zeros((T, 3)), gap, ee, dee, close)


def grasp_example(final_gap, close_5=True):
    gap = np.full(20, 0.08)
    gap[15:] = final_gap
    close = np.zeros(20, bool)
    close[5] = close_5
    return make_log(20, gap=gap, close=close)


def test_grasp_formula_examples():
    cfg = MiningConfig(d=10, delta=-0.05)
    assert raw_grasp_attribute(grasp_example(0.06), cfg)[5]
    assert not raw_grasp_attribute(grasp_example(0.01), cfg)[5]
    assert not raw_grasp_attribute(grasp_example(0.06, close_5=False), cfg)[5]


def test_grasp_lookahead_clamps_to_last_frame():
    gap = np.full(12, 0.08)
    gap[-1] = 0.0
    log = make_log(12, gap=gap, close=np.ones(12, bool))
    raw = raw_grasp_attribute(log, MiningConfig(d=10))
    # every frame looks at (at most) the last one, where the jaws shut fully
    assert not raw[5]
    assert raw[-1]  # the last frame compares with itself


def test_short_log_rejected():
    with pytest.raises(InvalidInputError):
        make_log(1)


def test_press_examples():
    T = 8
    dee = np.zeros((T, 3))
    dee[:5, 0] = 0.02
    stationary = make_log(T, dee=dee)
    assert raw_press_attribute(stationary)[:5].all()
    ee = np.zeros((T, 3))
    ee[:, 0] = 0.02 * np.minimum(np.arange(T), 5)
    moving = make_log(T, dee=dee, ee=ee)
    assert not raw_press_attribute(moving)[:3].any()
    still = make_log(T, ee=np.random.default_rng(0).normal(size=(T, 3)))
    assert not raw_press_attribute(still).any()


def test_press_smoothed_length():
    dee = np.zeros((10, 3))
    dee[2:8, 1] = 0.01
    out = mine_press_attribute(make_log(10, dee=dee))
    assert out.shape == (10,)
    assert out[3:7].all()


def test_attributed_trajectory_from_sequences():
    ee = np.arange(9, dtype=float).reshape(3, 3)
    log = make_log(3, ee=ee)
    traj = log_to_attributed_trajectory(log, [np.array([False, True, False])])
    np.testing.assert_array_equal(traj.points[:, 3], [0, 1, 0])
    np.testing.assert_array_equal(traj.points[:, :3], ee)
    zero = log_to_attributed_trajectory(log, [np.zeros(3, bool)])
    assert not zero.points[:, 3].any()
    with pytest.raises(InvalidInputError):
        log_to_attributed_trajectory(log, [np.zeros(4, bool)])


def test_smoothing_removes_isolated_flips():
    x = np.zeros(20, bool)
    x[5:15] = True
    x[9] = False
    x[1] = True
    np.testing.assert_array_equal(smooth(x, 5, 0.5), np.r_[np.zeros(5), np.ones(10), np.zeros(5)].astype(bool))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(5, 12), min_size=1, max_size=6), st.booleans())
def test_smoothing_idempotent_on_blocky_sequences(runs, start):
    seq = np.concatenate([np.full(n, (start + i) % 2 == 1) for i, n in enumerate(runs)])
    np.testing.assert_array_equal(smooth(seq, 5, 0.5), seq)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_mining_translation_invariant(dx, dy, dz):
    ep = _episodes(1)[0]
    log = ep.log
    shifted = RobotLog(log.joint_angles, log.gripper_gap, log.ee_position + [dx, dy, dz], log.delta_ee,
                       log.gripper_close)
    np.testing.assert_array_equal(mine_grasp_attribute(log), mine_grasp_attribute(shifted))
    np.testing.assert_array_equal(mine_press_attribute(log), mine_press_attribute(shifted))


def test_config_validation_and_presets():
    with pytest.raises(InvalidInputError):
        MiningConfig(d=0)
    with pytest.raises(InvalidInputError):
        MiningConfig(smooth_width=4)
    with pytest.raises(InvalidInputError):
        MiningConfig(smooth_threshold=0.0)
    assert PRESETS["bcz"].d == 1 and PRESETS["bcz"].delta == -0.07
    assert PRESETS["metaworld"] == MiningConfig()


_CACHE = {}


def _episodes(n):
    if n not in _CACHE:
        sim = Simulator()
        family = TaskFamily()
        tasks = family.tasks()
        eps = []
        for i in range(n):
            rng = np.random.default_rng((7, i))
            eps.append(generate_expert_episode(tasks[i % len(tasks)], family.sample_scene(rng), sim))
        _CACHE[n] = eps
    return _CACHE[n]


def expert_precision_recall(n):
    pred, truth = [], []
    for ep in _episodes(n):
        pred.append(mine_grasp_attribute(ep.log, MiningConfig(d=10, delta=-0.05)))
        truth.append(attachment_labels(ep.final_state, len(ep.log)))
    return precision_recall(np.concatenate(pred), np.concatenate(truth))


def test_mined_grasp_matches_simulator_ground_truth():
    assert expert_precision_recall(100) == (1.0, 1.0)


def test_mined_channel_covers_carry_segment():
    ep = _episodes(1)[0]
    traj = mine_trajectory(ep.log)
    truth = attachment_labels(ep.final_state, len(ep.log))
    assert truth.any()
    np.testing.assert_array_equal(traj.points[:, 3].astype(bool), truth)


def test_precision_recall_edge_cases():
    assert precision_recall([False], [False]) == (1.0, 1.0)
    assert precision_recall([True, False], [True, True]) == (1.0, 0.5)
    assert precision_recall([True, True], [True, False]) == (0.5, 1.0)
