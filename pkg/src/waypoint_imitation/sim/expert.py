"""Scripted expert episodes: oracle waypoints executed by the motor primitives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import RobotLog, Scene
from ..errors import InfeasibleTaskError
from ..primitives import PrimitiveConfig, Rollout, execute_waypoints
from ..tasks import task_success
from .world import SimState, Simulator


@dataclass
class Episode:
    task: object
    scene: Scene
    log: RobotLog
    final_state: SimState
    success: bool
    descriptors: np.ndarray
    failures: list


def generate_expert_episode(task, scene: Scene, sim: Optional[Simulator] = None,
                            cfg: PrimitiveConfig = PrimitiveConfig()) -> Episode:
    from ..infer.oracle import oracle_predict

    sim = sim or Simulator()
    waypoints = oracle_predict(scene, task, sim)
    rollout = Rollout(sim, sim.reset(scene))
    result = execute_waypoints(rollout, waypoints, cfg)
    if result.log is None:
        raise InfeasibleTaskError("expert produced an empty episode")
    return Episode(task, scene, result.log, result.state, task_success(task, result.state, sim),
                   result.descriptors, result.failures)
