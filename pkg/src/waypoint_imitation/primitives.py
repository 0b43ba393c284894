"""Hand-crafted motor primitives and the attributed-waypoint executor.

A :class:`Rollout` wraps a simulator and the current state, and records every
step into a robot log. Primitives drive a rollout; they never raise on task
failure and report it through :class:`PrimitiveResult` instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import AttributedWaypoint, RobotLog, scene_to_descriptor
from .errors import InvalidInputError, LocalizationError, NoiseBlobError, NoObjectError
from .sim.render import DepthImage, render_depth
from .sim.world import Action, SimState, Simulator

log = logging.getLogger(__name__)

FREE_SPACE = "free_space"
GRASP_AND_CARRY = "grasp_and_carry"
RELEASE_THEN_MOVE = "release_then_move"
CARRY = "carry"

DISPATCH = {
    (False, False): FREE_SPACE,
    (False, True): GRASP_AND_CARRY,
    (True, False): RELEASE_THEN_MOVE,
    (True, True): CARRY,
}


@dataclass(frozen=True)
class PrimitiveConfig:
    arrive_tol: float = 0.005
    step_budget: int = 200
    approach_height: float = 0.2
    hover_height: float = 0.15
    grasp_offset: float = 0.03
    lift_height: float = 0.15
    settle_steps: int = 3
    servo_budget: int = 60
    min_blob_pixels: int = 4
    background_depth: float = 1.0
    object_height_threshold: float = 0.01


@dataclass(frozen=True)
class PrimitiveCommand:
    start: AttributedWaypoint
    end: AttributedWaypoint
    primitive: str

    @classmethod
    def between(cls, start: AttributedWaypoint, end: AttributedWaypoint) -> "PrimitiveCommand":
        return cls(start, end, dispatch(start, end))


def dispatch(start: AttributedWaypoint, end: AttributedWaypoint) -> str:
    """Primitive connecting two waypoints, chosen by the thresholded "object in gripper" channel."""
    return DISPATCH[(bool(start.attributes[0] >= 0.5), bool(end.attributes[0] >= 0.5))]


@dataclass(frozen=True)
class GraspEstimate:
    object_position: np.ndarray
    component_pixel_count: int
    ground_plane_depth: float


@dataclass
class PrimitiveResult:
    state: SimState
    success: bool
    steps: int = 0
    flag: Optional[str] = None


class Rollout:
    """Mutable episode driver that logs the state before every action."""

    def __init__(self, sim: Simulator, state: SimState, record_descriptors: bool = True):
        self.sim = sim
        self.state = state
        self.record_descriptors = record_descriptors
        self._q, self._gap, self._ee, self._delta, self._close, self._desc = [], [], [], [], [], []
        self.failures: list = []

    @property
    def ee(self) -> np.ndarray:
        return self.sim.ee_position(self.state)

    @property
    def steps(self) -> int:
        return len(self._gap)

    def act(self, delta, close: bool) -> SimState:
        s = self.state
        self._q.append(s.joint_angles)
        self._gap.append(s.gripper_gap)
        self._ee.append(self.sim.ee_position(s))
        self._delta.append(np.asarray(delta, dtype=float))
        self._close.append(bool(close))
        if self.record_descriptors:
            self._desc.append(scene_to_descriptor(s.scene))
        self.state = self.sim.step(s, Action(tuple(delta), 1.0 if close else 0.0))
        return self.state

    def finish(self) -> None:
        """Append the terminal state as a final frame with a zero hold action."""
        holding = self.state.attached_object is not None
        self.act(np.zeros(3), holding)

    def robot_log(self) -> Optional[RobotLog]:
        if len(self._gap) < 2:
            return None
        return RobotLog(np.array(self._q), np.array(self._gap), np.array(self._ee),
                        np.array(self._delta), np.array(self._close))

    def descriptors(self) -> np.ndarray:
        return np.array(self._desc)


def _as_rollout(target, sim=None) -> Rollout:
    if isinstance(target, Rollout):
        return target
    if isinstance(target, SimState):
        return Rollout(sim or Simulator(), target)
    raise InvalidInputError("expected a Rollout or SimState")


def localize_nearest_object(depth: DepthImage, cfg: PrimitiveConfig = PrimitiveConfig()) -> GraspEstimate:
    """Estimate the position of the object nearest the image center.

    Background beyond ``background_depth`` is masked, the ground depth is the
    median of what remains, pixels at least ``object_height_threshold`` above
    the ground form the object mask, and the 4-connected component whose
    centroid is nearest the principal point is back-projected to the world.
    """
    d = depth.depths
    valid = np.isfinite(d) & (d <= cfg.background_depth)
    if not valid.any():
        raise NoObjectError("no depth returns within range")
    ground = float(np.median(d[valid]))
    mask = valid & (d <= ground - cfg.object_height_threshold)
    labels, count = ndimage.label(mask)
    if count == 0:
        raise NoObjectError("no above-floor blob in view")
    index = np.arange(1, count + 1)
    sizes = ndimage.sum_labels(mask, labels, index)
    keep = index[sizes >= cfg.min_blob_pixels]
    if keep.size == 0:
        raise NoiseBlobError(f"largest blob has {int(sizes.max())} pixels, below {cfg.min_blob_pixels}")
    centroids = np.array(ndimage.center_of_mass(mask, labels, keep))  # (row, col)
    cx, cy = depth.center
    dist = np.hypot(centroids[:, 0] - cy, centroids[:, 1] - cx)
    pick = int(np.argmin(dist))
    label = keep[pick]
    row, col = centroids[pick]
    r, c = int(round(row)), int(round(col))
    if 0 <= r < depth.height and 0 <= c < depth.width and labels[r, c] == label:
        z = float(d[r, c])
    else:
        z = float(np.median(d[labels == label]))
    position = depth.back_project(col, row, z)
    return GraspEstimate(position, int(sizes[label - 1]), ground)


def _move_toward(ro: Rollout, goal, close: bool) -> float:
    err = np.asarray(goal) - ro.ee
    dist = float(np.linalg.norm(err))
    step = ro.sim.arm.max_ee_step
    delta = err if dist <= step else err * (step / dist)
    ro.act(delta, close)
    return dist


def _straight_line(ro: Rollout, destination, close: bool, cfg: PrimitiveConfig) -> PrimitiveResult:
    dest = ro.state.scene.workspace.clip(destination)
    start = ro.steps
    while ro.steps - start < cfg.step_budget:
        before = ro.ee
        if np.linalg.norm(dest - before) <= cfg.arrive_tol:
            return PrimitiveResult(ro.state, True, ro.steps - start)
        _move_toward(ro, dest, close)
        if np.linalg.norm(ro.ee - before) < 1e-7:
            return PrimitiveResult(ro.state, False, ro.steps - start, "stalled")
    ok = np.linalg.norm(dest - ro.ee) <= cfg.arrive_tol
    return PrimitiveResult(ro.state, bool(ok), ro.steps - start, None if ok else "timeout")


def run_free_space(rollout, destination, cfg: PrimitiveConfig = PrimitiveConfig(), sim=None) -> PrimitiveResult:
    """Straight-line motion with the gripper open until within ``arrive_tol``."""
    return _straight_line(_as_rollout(rollout, sim), destination, False, cfg)


def run_carry(rollout, destination, cfg: PrimitiveConfig = PrimitiveConfig(), sim=None) -> PrimitiveResult:
    """Free-space motion with the gripper kept closed."""
    ro = _as_rollout(rollout, sim)
    no_load = ro.state.attached_object is None
    res = _straight_line(ro, destination, True, cfg)
    if no_load:
        res.flag = res.flag or "no-load"
    return res


def run_release(rollout, cfg: PrimitiveConfig = PrimitiveConfig(), sim=None) -> PrimitiveResult:
    """Hold still for ``settle_steps``, then open the gripper in place."""
    ro = _as_rollout(rollout, sim)
    start = ro.steps
    holding = ro.state.attached_object is not None
    for _ in range(cfg.settle_steps if holding else 0):
        ro.act(np.zeros(3), True)
    gap_max = ro.sim.config.gap_max
    while ro.state.gripper_gap < gap_max and ro.steps - start < cfg.step_budget:
        ro.act(np.zeros(3), False)
    return PrimitiveResult(ro.state, ro.state.attached_object is None, ro.steps - start,
                           None if holding else "no-load")


def run_grasp_primitive(rollout, target_hint, cfg: PrimitiveConfig = PrimitiveConfig(), sim=None) -> PrimitiveResult:
    """Approach, localize, descend, close and lift.

    The hint places the camera for the first render; afterwards the depth
    estimate is refreshed every step until the gripper hovers above the
    object, and frozen for the descent.
    """
    ro = _as_rollout(rollout, sim)
    start = ro.steps
    hint = np.asarray(target_hint, dtype=float)
    if ro.state.gripper_gap < ro.sim.config.gap_max:
        run_release(ro, cfg)
    run_free_space(ro, (hint[0], hint[1], cfg.approach_height), cfg)

    estimate = None
    hover = np.array([0.0, 0.0, cfg.hover_height])
    for _ in range(cfg.servo_budget):
        try:
            estimate = localize_nearest_object(render_depth(ro.sim, ro.state), cfg).object_position
        except LocalizationError as exc:
            if estimate is None:
                log.debug("grasp localization failed: %s", exc)
                return PrimitiveResult(ro.state, False, ro.steps - start, "no-object")
        goal = ro.state.scene.workspace.clip(estimate + hover)
        if np.linalg.norm(goal - ro.ee) <= cfg.arrive_tol:
            break
        _move_toward(ro, goal, False)
    if estimate is None:
        return PrimitiveResult(ro.state, False, ro.steps - start, "no-object")

    run_free_space(ro, estimate + np.array([0.0, 0.0, cfg.grasp_offset]), cfg)
    for _ in range(cfg.settle_steps):
        ro.act(np.zeros(3), False)
    ro.act(np.zeros(3), True)
    if ro.state.attached_object is None:
        # nothing between the jaws: reopen so no phantom load is carried
        run_release(ro, cfg)
        return PrimitiveResult(ro.state, False, ro.steps - start, "missed")
    run_carry(ro, ro.ee + np.array([0.0, 0.0, cfg.lift_height]), cfg)
    return PrimitiveResult(ro.state, ro.state.attached_object is not None, ro.steps - start)


@dataclass
class ExecutionResult:
    state: SimState
    log: Optional[RobotLog]
    commands: list
    failures: list = field(default_factory=list)
    descriptors: Optional[np.ndarray] = None


def execute_waypoints(rollout, waypoints, cfg: PrimitiveConfig = PrimitiveConfig(), sim=None,
                      finish: bool = True) -> ExecutionResult:
    """Run the primitive chosen for each consecutive waypoint pair.

    A failed primitive is recorded and execution continues with the next pair.
    A single waypoint is reached by free-space motion.
    """
    ro = _as_rollout(rollout, sim)
    wps = [w if isinstance(w, AttributedWaypoint) else AttributedWaypoint.from_vector(w) for w in waypoints]
    if not wps:
        raise InvalidInputError("need at least one waypoint")
    if len(wps) == 1:
        commands = [PrimitiveCommand(wps[0], wps[0], FREE_SPACE)]
    else:
        commands = [PrimitiveCommand.between(a, b) for a, b in zip(wps[:-1], wps[1:])]
    failures = []
    for i, cmd in enumerate(commands):
        kind = cmd.primitive
        if kind == FREE_SPACE:
            results = [run_free_space(ro, cmd.end.position, cfg)]
        elif kind == CARRY:
            results = [run_carry(ro, cmd.end.position, cfg)]
        elif kind == GRASP_AND_CARRY:
            results = [run_grasp_primitive(ro, cmd.start.position, cfg)]
            if results[0].success:
                results.append(run_carry(ro, cmd.end.position, cfg))
            else:
                results.append(run_free_space(ro, cmd.end.position, cfg))
        else:
            results = [run_release(ro, cfg), run_free_space(ro, cmd.end.position, cfg)]
        for res in results:
            if not res.success or res.flag:
                failures.append((i, kind, res.flag or "failed"))
    if finish and ro.steps > 0:
        ro.finish()
    ro.failures.extend(failures)
    desc = ro.descriptors() if ro.record_descriptors and ro.steps else None
    return ExecutionResult(ro.state, ro.robot_log(), commands, failures, desc)
