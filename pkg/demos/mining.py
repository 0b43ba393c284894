"""Mining the 'holding an object' attribute from a robot log.

The gripper is told to close; if the jaws then stay apart by more than a
threshold, something is between them. The raw labels are smoothed with a
box filter and compared with the simulator's own record of when the object
was attached.

    python3 demos/mining.py [--episodes 20]
"""

import argparse

import numpy as np

from waypoint_imitation.mining import MiningConfig, mine_grasp_attribute, precision_recall, raw_grasp_attribute
from waypoint_imitation.sim.expert import generate_expert_episode
from waypoint_imitation.sim.world import Simulator, attachment_labels
from waypoint_imitation.tasks import TaskFamily

ap = argparse.ArgumentParser()
ap.add_argument("--episodes", type=int, default=20)
args = ap.parse_args()

family = TaskFamily()
sim = Simulator()
cfg = MiningConfig()  # d=10 lookahead frames, delta=-0.05 m

ep = generate_expert_episode(family.tasks()[5], family.sample_scene(np.random.default_rng(0)), sim)
raw = raw_grasp_attribute(ep.log, cfg)
mined = mine_grasp_attribute(ep.log, cfg)
truth = attachment_labels(ep.final_state, len(ep.log))


def strip(x):
    return "".join("#" if v else "." for v in x)


print("gap   " + "".join(str(min(int(g * 100), 9)) for g in ep.log.gripper_gap))
print("close " + strip(ep.log.gripper_close))
print("raw   " + strip(raw))
print("mined " + strip(mined))
print("truth " + strip(truth))

pred, gt = [], []
for i in range(args.episodes):
    e = generate_expert_episode(family.tasks()[i % 16], family.sample_scene(np.random.default_rng((1, i))), sim)
    pred.append(mine_grasp_attribute(e.log, cfg))
    gt.append(attachment_labels(e.final_state, len(e.log)))
p, r = precision_recall(np.concatenate(pred), np.concatenate(gt))
print(f"\n{args.episodes} expert episodes: precision {p:.3f}, recall {r:.3f}")
