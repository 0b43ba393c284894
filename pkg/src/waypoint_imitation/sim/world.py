"""Kinematic world: 4-DoF control (delta end effector + gripper closure) with attachment rules.

There are no dynamics. A closing gripper attaches the object whose center
is within ``grasp_radius`` of the finger point once the jaws reach the
object's width; an opening gripper releases it and the object drops to
rest on the ground plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..core import Scene
from ..errors import InvalidInputError
from .arm import ArmModel, dls_solve, forward_kinematics, inverse_kinematics

ATTACH = "attach"
DETACH = "detach"


@dataclass(frozen=True)
class SimConfig:
    gap_max: float = 0.08
    gripper_rate: float = 0.05  # meters of jaw travel per step
    grasp_radius: float = 0.03
    finger_offset: float = 0.03  # finger point sits this far below the EE
    stall_ratio: float = 0.9  # jaws squeeze a held object to this fraction of its width
    camera_height: float = 0.05
    resolution: tuple = (64, 64)
    intrinsics: tuple = (100.0, 100.0, 32.0, 32.0)
    home_ee: tuple = (0.35, 0.0, 0.3)
    home_seed: tuple = (0.0, 1.0, -2.0)


@dataclass(frozen=True, eq=False)
class SimState:
    joint_angles: np.ndarray
    gripper_gap: float
    scene: Scene
    attached_object: Optional[int] = None
    step_count: int = 0
    truth_attach_events: tuple = ()
    attach_offset: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.array(self.joint_angles, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "joint_angles", q)
        object.__setattr__(self, "gripper_gap", float(self.gripper_gap))
        if self.attach_offset is not None:
            off = np.array(self.attach_offset, dtype=float)
            off.setflags(write=False)
            object.__setattr__(self, "attach_offset", off)

    def __eq__(self, other):
        if not isinstance(other, SimState):
            return NotImplemented
        offsets_equal = (self.attach_offset is None and other.attach_offset is None) or (
            self.attach_offset is not None and other.attach_offset is not None
            and np.array_equal(self.attach_offset, other.attach_offset))
        return (np.array_equal(self.joint_angles, other.joint_angles)
                and self.gripper_gap == other.gripper_gap and self.scene == other.scene
                and self.attached_object == other.attached_object and self.step_count == other.step_count
                and self.truth_attach_events == other.truth_attach_events and offsets_equal)

    def same_physical_state(self, other: "SimState") -> bool:
        """Equality ignoring the step counter."""
        return replace(self, step_count=other.step_count) == other


@dataclass(frozen=True)
class Action:
    delta_ee: tuple
    gripper_command: float = 0.0

    @property
    def close(self) -> bool:
        return self.gripper_command >= 0.5


class Simulator:
    """Holds the arm and world parameters; states are immutable values."""

    def __init__(self, arm: ArmModel = None, config: SimConfig = None):
        self.arm = arm or ArmModel()
        self.config = config or SimConfig()
        self._home = None

    @property
    def home_angles(self) -> np.ndarray:
        if self._home is None:
            self._home = inverse_kinematics(self.arm, self.config.home_ee, self.config.home_seed, tol=1e-10)
        return self._home

    def reset(self, scene: Scene, joint_angles=None) -> SimState:
        if tuple(scene.arm_base) != tuple(self.arm.base):
            raise InvalidInputError("scene arm_base must match the arm model base")
        q = self.home_angles if joint_angles is None else np.asarray(joint_angles, dtype=float)
        return SimState(q, self.config.gap_max, scene)

    def ee_position(self, state: SimState) -> np.ndarray:
        return forward_kinematics(self.arm, state.joint_angles)

    def finger_point(self, state: SimState) -> np.ndarray:
        return self.ee_position(state) - np.array([0.0, 0.0, self.config.finger_offset])

    def camera_position(self, state: SimState) -> np.ndarray:
        return self.ee_position(state) + np.array([0.0, 0.0, self.config.camera_height])

    def step(self, state: SimState, action) -> SimState:
        """Advance one control step. Actions are clipped, never rejected."""
        if not isinstance(action, Action):
            delta, cmd = action
            action = Action(tuple(delta), float(cmd))
        cfg = self.config
        ws = state.scene.workspace
        delta = np.nan_to_num(np.asarray(action.delta_ee, dtype=float))
        norm = float(np.linalg.norm(delta))
        if norm > self.arm.max_ee_step:
            delta = delta * (self.arm.max_ee_step / norm)

        q = state.joint_angles
        if norm > 0.0:
            ee = forward_kinematics(self.arm, q)
            target = ws.clip(ee + delta)
            q_new, _, _ = dls_solve(self.arm, target, q)
            if ws.contains(forward_kinematics(self.arm, q_new), tol=1e-6):
                q = q_new
        scene = state.scene
        attached = state.attached_object
        offset = state.attach_offset
        events = state.truth_attach_events
        ee = forward_kinematics(self.arm, q)
        finger = ee - np.array([0.0, 0.0, cfg.finger_offset])

        if attached is not None and norm > 0.0:
            obj = scene.object_by_id(attached)
            scene = scene.with_object_position(attached, self._held_position(obj, finger + offset, ws))

        command = float(np.clip(action.gripper_command, 0.0, 1.0))
        target_gap = cfg.gap_max * (1.0 - command)
        gap = state.gripper_gap
        if target_gap < gap:
            new_gap = max(target_gap, gap - cfg.gripper_rate)
            if attached is None:
                obj = self._graspable(scene, finger)
                if obj is not None and new_gap <= obj.size:
                    attached = obj.id
                    offset = np.asarray(obj.position) - finger
                    events = events + ((state.step_count, ATTACH, obj.id),)
            if attached is not None:
                new_gap = max(new_gap, cfg.stall_ratio * scene.object_by_id(attached).size)
            gap = new_gap
        elif target_gap > gap:
            gap = min(target_gap, gap + cfg.gripper_rate)
            if attached is not None:
                obj = scene.object_by_id(attached)
                rest = (obj.position[0], obj.position[1], obj.half_height)
                scene = scene.with_object_position(attached, rest)
                events = events + ((state.step_count, DETACH, attached),)
                attached, offset = None, None

        return SimState(q, gap, scene, attached, state.step_count + 1, events, offset)

    def _graspable(self, scene, finger):
        best, best_d = None, self.config.grasp_radius
        for obj in scene.objects:
            d = float(np.linalg.norm(np.asarray(obj.position) - finger))
            if d <= best_d:
                best, best_d = obj, d
        return best

    @staticmethod
    def _held_position(obj, position, ws):
        p = ws.clip(position)
        p[2] = max(p[2], obj.half_height)
        return tuple(p)


def attachment_labels(state: SimState, length: int, object_id=None) -> np.ndarray:
    """Ground-truth "object held after action t" for t in ``range(length)``."""
    labels = np.zeros(length, dtype=bool)
    held = False
    events = [e for e in state.truth_attach_events if object_id is None or e[2] == object_id]
    idx = 0
    for t in range(length):
        while idx < len(events) and events[idx][0] == t:
            held = events[idx][1] == ATTACH
            idx += 1
        labels[t] = held
    return labels
