"""A single pick-and-place episode, solved with ground-truth waypoints.

Walks through the pieces the learned model relies on: a random scene, the
five attributed waypoints, the primitive each pair of waypoints selects,
what the eye-in-hand camera sees, and whether the object ends up in the bin.

    python3 demos/pick_and_place.py [--seed 3] [--pgm view.pgm]
"""

import argparse

import numpy as np

from waypoint_imitation.infer.oracle import oracle_predict
from waypoint_imitation.primitives import PrimitiveCommand, Rollout, execute_waypoints
from waypoint_imitation.sim.render import render_depth, save_pgm
from waypoint_imitation.sim.world import Simulator
from waypoint_imitation.tasks import PickPlaceTask, TaskFamily, task_success

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=3)
ap.add_argument("--object", type=int, default=0)
ap.add_argument("--bin", type=int, default=1)
ap.add_argument("--pgm", default=None, help="write the camera image at the grasp hover pose")
args = ap.parse_args()

family = TaskFamily()
sim = Simulator()
scene = family.sample_scene(np.random.default_rng(args.seed))
task = PickPlaceTask(args.object, args.bin)

print(f"task {task.task_id}")
for o in scene.objects:
    print(f"  object {o.id}: {o.shape:6s} {o.size * 100:.1f} cm at ({o.position[0]:.3f}, {o.position[1]:.3f})")
for b in scene.bins:
    print(f"  bin {b.id}: center ({b.center[0]:.3f}, {b.center[1]:.3f})")

# 1. waypoints: each is a position plus a "holding" attribute
waypoints = oracle_predict(scene, task, sim)
print("\nwaypoints")
for w in waypoints:
    print(f"  ({w.position[0]:.3f}, {w.position[1]:.3f}, {w.position[2]:.3f})  holding={w.attributes[0]:.0f}")

# 2. the attribute change between neighbours picks the primitive
print("\nprimitives")
for a, b in zip(waypoints[:-1], waypoints[1:]):
    print(f"  {PrimitiveCommand.between(a, b).primitive}")

# 3. the camera view from above the object, before the grasp descends
state = sim.reset(scene)
ro = Rollout(sim, state)
execute_waypoints(ro, waypoints[:1], finish=False)
img = render_depth(sim, ro.state)
print(f"\ndepth image {img.depths.shape}, range {img.depths.min():.3f} to {img.depths.max():.3f} m")
if args.pgm:
    save_pgm(img, args.pgm)
    print(f"wrote {args.pgm}")

# 4. the whole episode
result = execute_waypoints(Rollout(sim, sim.reset(scene)), waypoints)
print(f"\n{len(result.log)} steps, failures: {result.failures or 'none'}")
print(f"success: {task_success(task, result.state, sim)}")
