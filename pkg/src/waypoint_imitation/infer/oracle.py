"""Ground-truth waypoints for a task, built from the true object and bin positions."""

from __future__ import annotations

import numpy as np

from ..core import AttributedWaypoint, Scene
from ..errors import InfeasibleTaskError, InvalidInputError
from ..sim.arm import shoulder_distance
from ..sim.world import Simulator
from ..tasks import PickPlaceTask, ReachTask

N_WAYPOINTS = 5
CARRY_HEIGHT = 0.2
RETREAT_RISE = 0.05


def _check_reachable(sim, point):
    d = shoulder_distance(sim.arm, point)
    if not sim.arm.min_reach <= d <= sim.arm.reach:
        raise InfeasibleTaskError(f"point {np.round(point, 3).tolist()} is out of reach")


def oracle_predict(scene: Scene, task, sim: Simulator = None, approach_height: float = 0.2) -> list[AttributedWaypoint]:
    """Canonical five-waypoint solution.

    Pick-place: above the object (open), above the object after the lift
    (holding), above the bin (holding), just above the bin after release
    (open), and the home pose (open). The grasp is triggered by the first
    open-to-holding pair and the release by the holding-to-open pair.
    Reach: the home pose followed by the reach points, padded with the last.
    """
    sim = sim or Simulator()
    home = np.asarray(sim.config.home_ee, dtype=float)
    if isinstance(task, PickPlaceTask):
        try:
            obj = scene.object_by_id(task.object_id)
            bin_ = scene.bin_by_id(task.bin_id)
        except InvalidInputError as exc:
            raise InfeasibleTaskError(str(exc)) from exc
        ox, oy, _ = obj.position
        bx, by, _ = bin_.center
        pts = [
            ((ox, oy, approach_height), 0.0),
            ((ox, oy, approach_height), 1.0),
            ((bx, by, CARRY_HEIGHT), 1.0),
            ((bx, by, CARRY_HEIGHT + RETREAT_RISE), 0.0),
            ((bx, by, CARRY_HEIGHT + 2 * RETREAT_RISE), 0.0),
        ]
        for p, _ in pts:
            _check_reachable(sim, p)
            if not scene.workspace.contains(p):
                raise InfeasibleTaskError("waypoint outside the workspace")
        return [AttributedWaypoint(p, [a]) for p, a in pts]
    if isinstance(task, ReachTask):
        points = [np.asarray(p, dtype=float) for p in task.points]
        if not 1 <= len(points) <= N_WAYPOINTS - 1:
            raise InfeasibleTaskError("reach tasks take 1 to 4 points")
        for p in points:
            if not scene.workspace.contains(p):
                raise InfeasibleTaskError("reach point outside the workspace")
            _check_reachable(sim, p)
        seq = [home] + points
        seq += [points[-1]] * (N_WAYPOINTS - len(seq))
        return [AttributedWaypoint(p, [0.0]) for p in seq]
    raise InfeasibleTaskError(f"unsupported task {task!r}")
