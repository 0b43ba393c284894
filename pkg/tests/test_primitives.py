import itertools

import numpy as np
import pytest

from waypoint_imitation.core import AttributedWaypoint, Scene, SceneObject
from waypoint_imitation.errors import ConvergenceError, NoObjectError, NoiseBlobError, UnreachableError
from waypoint_imitation.infer.oracle import oracle_predict
from waypoint_imitation.primitives import (
    CARRY,
    DISPATCH,
    FREE_SPACE,
    GRASP_AND_CARRY,
    RELEASE_THEN_MOVE,
    PrimitiveCommand,
    PrimitiveConfig,
    Rollout,
    dispatch,
    execute_waypoints,
    localize_nearest_object,
    run_carry,
    run_free_space,
    run_grasp_primitive,
    run_release,
)
from waypoint_imitation.sim.arm import inverse_kinematics
from waypoint_imitation.sim.render import render_scene
from waypoint_imitation.sim.world import Simulator
from waypoint_imitation.tasks import PickPlaceTask, ReachTask, TaskFamily, task_success


def wp(p, a):
    return AttributedWaypoint(p, [a])


def test_dispatch_table_is_complete():
    seen = set()
    for a, b in itertools.product([0.0, 0.49, 0.5, 1.0], repeat=2):
        kind = dispatch(wp((0.3, 0, 0.2), a), wp((0.4, 0, 0.2), b))
        assert kind == DISPATCH[(a >= 0.5, b >= 0.5)]
        seen.add(kind)
    assert seen == {FREE_SPACE, GRASP_AND_CARRY, RELEASE_THEN_MOVE, CARRY}
    assert PrimitiveCommand.between(wp((0, 0, 0), 1), wp((0, 0, 0), 0)).primitive == RELEASE_THEN_MOVE


# localization ------------------------------------------------------------

def test_localizes_single_sphere():
    scene = Scene((SceneObject(0, "sphere", 0.04, (0.3, 0.0, 0.02)),))
    est = localize_nearest_object(render_scene(scene, (0.3, 0.0, 0.5)))
    assert np.hypot(*(est.object_position[:2] - [0.3, 0.0])) <= 0.01
    assert est.component_pixel_count >= 4
    assert est.ground_plane_depth == pytest.approx(0.5)


def test_localization_accuracy_random_placements():
    rng = np.random.default_rng(0)
    for _ in range(100):
        size = rng.uniform(0.03, 0.05)
        pos = np.array([rng.uniform(0.25, 0.55), rng.uniform(-0.25, 0.25), size / 2])
        shape = ("sphere", "box")[rng.integers(2)]
        cam = pos + np.array([rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), 0])
        cam[2] = rng.uniform(0.2, 0.4)
        est = localize_nearest_object(render_scene(Scene((SceneObject(0, shape, size, tuple(pos)),)), cam))
        assert np.hypot(*(est.object_position[:2] - pos[:2])) <= 0.01


def test_centered_object_wins():
    scene = Scene((SceneObject(0, "box", 0.04, (0.40, 0.0, 0.02)), SceneObject(1, "box", 0.04, (0.40, 0.11, 0.02))))
    est = localize_nearest_object(render_scene(scene, (0.40, 0.0, 0.3)))
    assert np.hypot(*(est.object_position[:2] - [0.40, 0.0])) < 0.01
    est = localize_nearest_object(render_scene(scene, (0.40, 0.08, 0.3)))
    assert np.hypot(*(est.object_position[:2] - [0.40, 0.11])) < 0.01


def test_empty_scene_raises_no_object():
    with pytest.raises(NoObjectError):
        localize_nearest_object(render_scene(Scene(), (0.4, 0.0, 0.3)))


def test_tiny_blob_is_noise():
    scene = Scene((SceneObject(0, "sphere", 0.02, (0.4, 0.0, 0.01)),))
    img = render_scene(scene, (0.4, 0.0, 0.9))
    with pytest.raises(NoiseBlobError):
        localize_nearest_object(img, PrimitiveConfig(min_blob_pixels=50))


# primitives ----------------------------------------------------------------

def _rollout(*objects):
    sim = Simulator()
    return Rollout(sim, sim.reset(Scene(tuple(objects))))


def test_free_space_to_current_position_is_immediate():
    ro = _rollout()
    res = run_free_space(ro, ro.ee)
    assert res.success and res.steps == 0


def test_free_space_path_is_straight():
    ro = _rollout()
    start = ro.ee.copy()
    goal = start + np.array([0.0, 0.2, 0.0])
    res = run_free_space(ro, goal)
    assert res.success and res.steps >= 10
    assert np.linalg.norm(ro.ee - goal) < 0.005
    path = np.array(ro._ee[1:] + [ro.ee])
    u = (goal - start) / np.linalg.norm(goal - start)
    off = (path - start) - np.outer((path - start) @ u, u)
    assert np.max(np.linalg.norm(off, axis=1)) < 1e-6


def test_free_space_random_destinations():
    # joint limits cut the high, close corner of the box out of the reachable set
    rng = np.random.default_rng(1)
    tried = 0
    while tried < 20:
        ro = _rollout()
        goal = np.array([rng.uniform(0.25, 0.55), rng.uniform(-0.25, 0.25), rng.uniform(0.05, 0.35)])
        try:
            inverse_kinematics(ro.sim.arm, goal, ro.sim.home_angles)
        except (UnreachableError, ConvergenceError):
            continue
        tried += 1
        assert run_free_space(ro, goal).success
        assert np.linalg.norm(ro.ee - goal) < 0.005


def test_grasp_carry_release_cycle():
    obj = SceneObject(0, "sphere", 0.04, (0.4, 0.1, 0.02))
    ro = _rollout(obj)
    res = run_grasp_primitive(ro, (0.41, 0.09, 0.2))
    assert res.success
    assert ro.state.scene.object_by_id(0).position[2] >= 0.02 + 0.10
    goal = np.array([0.3, -0.1, 0.2])
    res = run_carry(ro, goal)
    assert res.success and res.flag is None and ro.state.attached_object == 0
    res = run_release(ro)
    assert res.success and ro.state.attached_object is None
    final = ro.state.scene.object_by_id(0).position
    assert final[2] == pytest.approx(obj.half_height)
    np.testing.assert_allclose(final[:2], goal[:2], atol=0.01)


def test_grasp_without_objects_fails_cleanly():
    ro = _rollout()
    res = run_grasp_primitive(ro, (0.4, 0.0, 0.2))
    assert not res.success and res.flag == "no-object"


def test_carry_without_load_flags():
    ro = _rollout()
    res = run_carry(ro, ro.ee + [0.0, 0.05, 0.0])
    assert res.flag == "no-load"


def test_grasp_success_over_random_scenes():
    rng = np.random.default_rng(2)
    ok = 0
    for _ in range(50):
        size = rng.uniform(0.036, 0.05)
        pos = (rng.uniform(0.25, 0.55), rng.uniform(-0.25, 0.25), size / 2)
        ro = _rollout(SceneObject(0, ("sphere", "box")[rng.integers(2)], size, pos))
        hint = np.array(pos) + [rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0]
        res = run_grasp_primitive(ro, hint)
        ok += res.success and ro.state.scene.object_by_id(0).position[2] >= pos[2] + 0.10
    assert ok / 50 >= 0.95


def test_grasp_selects_object_nearest_hint():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = np.array([rng.uniform(0.3, 0.44), rng.uniform(-0.15, 0.15)])
        angle = rng.uniform(0, 2 * np.pi)
        b = a + 0.12 * np.array([np.cos(angle), np.sin(angle)])
        objs = (SceneObject(0, "box", 0.04, (a[0], a[1], 0.02)), SceneObject(1, "box", 0.04, (b[0], b[1], 0.02)))
        ro = _rollout(*objs)
        assert run_grasp_primitive(ro, (a[0], a[1], 0.2)).success
        assert ro.state.attached_object == 0


def test_grasp_recovers_from_perturbed_object():
    obj = SceneObject(0, "box", 0.04, (0.40, 0.05, 0.02))
    sim = Simulator()
    state = sim.reset(Scene((obj,)))
    # the object sits 2 cm from where the hint says it is
    ro = Rollout(sim, state.__class__(state.joint_angles, state.gripper_gap,
                                      state.scene.with_object_position(0, (0.42, 0.05, 0.02))))
    assert run_grasp_primitive(ro, obj.position).success


# executor -------------------------------------------------------------------

def test_all_zero_attributes_follow_polyline():
    ro = _rollout()
    pts = [(0.35, 0.0, 0.3), (0.4, 0.1, 0.25), (0.45, -0.1, 0.2)]
    res = execute_waypoints(ro, [wp(p, 0) for p in pts])
    assert [c.primitive for c in res.commands] == [FREE_SPACE, FREE_SPACE]
    assert res.failures == []
    assert np.linalg.norm(ro.sim.ee_position(res.state) - pts[-1]) < 0.005


def test_grasp_carry_release_waypoints():
    obj = SceneObject(0, "sphere", 0.04, (0.4, 0.1, 0.02))
    ro = _rollout(obj)
    res = execute_waypoints(ro, [wp((0.4, 0.1, 0.2), 0), wp((0.35, -0.1, 0.2), 1), wp((0.35, -0.1, 0.3), 0)])
    assert [c.primitive for c in res.commands] == [GRASP_AND_CARRY, RELEASE_THEN_MOVE]
    assert res.failures == []
    np.testing.assert_allclose(res.state.scene.object_by_id(0).position[:2], (0.35, -0.1), atol=0.01)
    assert len(res.log) == res.state.step_count


def test_failures_are_recorded_and_execution_continues():
    ro = _rollout()
    res = execute_waypoints(ro, [wp((0.4, 0.0, 0.2), 0), wp((0.4, 0.0, 0.25), 1), wp((0.35, 0.0, 0.3), 0)])
    assert any(f[2] == "no-object" for f in res.failures)
    assert np.linalg.norm(ro.sim.ee_position(res.state) - (0.35, 0.0, 0.3)) < 0.005


def test_single_waypoint_is_reached():
    ro = _rollout()
    res = execute_waypoints(ro, [wp((0.45, 0.05, 0.2), 0)])
    assert np.linalg.norm(ro.sim.ee_position(res.state) - (0.45, 0.05, 0.2)) < 0.005


def test_oracle_waypoints_solve_pick_place():
    family = TaskFamily()
    sim = Simulator()
    rng = np.random.default_rng(4)
    wins = 0
    for i in range(20):
        scene = family.sample_scene(rng)
        task = PickPlaceTask(int(rng.integers(4)), int(rng.integers(4)))
        res = execute_waypoints(Rollout(sim, sim.reset(scene)), oracle_predict(scene, task, sim))
        wins += task_success(task, res.state, sim)
    assert wins >= 19


def test_oracle_structure():
    scene = TaskFamily().sample_scene(np.random.default_rng(5))
    wps = oracle_predict(scene, PickPlaceTask(0, 1))
    a = [float(w.attributes[0]) for w in wps]
    assert sum(1 for x, y in zip(a, a[1:]) if x < 0.5 <= y) == 1
    assert sum(1 for x, y in zip(a, a[1:]) if x >= 0.5 > y) == 1
    reach = oracle_predict(scene, ReachTask(((0.4, 0.1, 0.2),)))
    assert all(float(w.attributes[0]) == 0 for w in reach) and len(reach) == 5
