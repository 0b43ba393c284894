"""Soft-DTW as a training loss.

First, the soft-DTW value of two random curves as gamma shrinks: it
approaches the hard DTW cost from below. Then five free waypoints are fitted
directly to a mined expert trajectory through the multi-resolution loss.
This is the best the 5-waypoint output could ever do for that trajectory.

    python3 demos/soft_dtw.py
"""

import numpy as np

from waypoint_imitation.datasets import record_from_episode
from waypoint_imitation.infer.train import TrainConfig, direct_fit
from waypoint_imitation.sdtw import HEAD_OFFSETS, SdtwConfig, sdtw_forward
from waypoint_imitation.sim.expert import generate_expert_episode
from waypoint_imitation.tasks import PickPlaceTask, TaskFamily

rng = np.random.default_rng(0)
X = 0.1 * rng.normal(size=(6, 4))
Y = 0.1 * rng.normal(size=(9, 4))
hard = sdtw_forward(X, Y, SdtwConfig(1e-9))
print(f"hard DTW {hard:.6f}")
for gamma in (0.1, 0.01, 0.001, 0.0001):
    soft = sdtw_forward(X, Y, SdtwConfig(gamma))
    print(f"  gamma={gamma:<6} soft-DTW {soft:.6f}  (hard - soft = {hard - soft:.2e})")

family = TaskFamily()
ep = generate_expert_episode(PickPlaceTask(2, 0), family.sample_scene(np.random.default_rng(1)))
target = record_from_episode(ep).target
print(f"\nexpert trajectory: {len(target)} frames, holding on {int(target.points[:, 3].sum())} of them")

W, loss = direct_fit(target, TrainConfig(), iterations=1500)
print(f"direct fit loss {loss:.4f}; the 5-waypoint head:")
for w in W[HEAD_OFFSETS[-1]:]:
    print(f"  ({w[0]:.3f}, {w[1]:.3f}, {w[2]:.3f})  holding={w[3]:.2f}")
