"""Expert data collection and demonstration/trajectory pairing."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AttributedTrajectory, DemonstrationClip, Sample, make_clip, scene_to_descriptor
from .mining import MiningConfig, mine_trajectory
from .sim.expert import Episode, generate_expert_episode
from .sim.world import Simulator
from .tasks import TaskFamily


@dataclass(frozen=True, eq=False)
class EpisodeRecord:
    """One successful expert episode reduced to what training needs."""

    task_id: str
    clip: DemonstrationClip
    instance_descriptor: np.ndarray
    target: AttributedTrajectory


def record_from_episode(ep: Episode, mining: MiningConfig = MiningConfig()) -> EpisodeRecord:
    traj = mine_trajectory(ep.log, mining)
    return EpisodeRecord(ep.task.task_id, make_clip(ep.descriptors, traj, "task"),
                         scene_to_descriptor(ep.scene), traj)


def _collect_one(args):
    family, task, seed, index, mining, max_attempts = args
    sim = Simulator()
    for attempt in range(max_attempts):
        rng = np.random.default_rng((seed, index, attempt))
        ep = generate_expert_episode(task, family.sample_scene(rng), sim)
        if ep.success:
            return record_from_episode(ep, mining)
    return None


def collect_expert_records(family: TaskFamily, tasks, episodes_per_task: int = 100, seed: int = 0,
                           mining: MiningConfig = MiningConfig(), jobs: int = 1,
                           max_attempts: int = 5) -> list[EpisodeRecord]:
    """Successful expert episodes per task; randomness derives from ``(seed, episode index)``."""
    jobs_args = []
    for t_index, task in enumerate(tasks):
        for e in range(episodes_per_task):
            jobs_args.append((family, task, seed, t_index * 1_000_000 + e, mining, max_attempts))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_collect_one, jobs_args, chunksize=8))
    else:
        records = [_collect_one(a) for a in jobs_args]
    return [r for r in records if r is not None]


def pair_records(records, pairings: int = 10, seed: int = 0, shuffle_tasks: bool = False) -> list[Sample]:
    """Pair each trajectory with demonstrations of other episodes of the same task.

    With ``shuffle_tasks`` the demonstrations come from any task, which breaks
    the pairing (a control for whether the model reads the demonstration).
    """
    rng = np.random.default_rng(seed)
    by_task: dict = {}
    for i, r in enumerate(records):
        by_task.setdefault(r.task_id, []).append(i)
    samples = []
    for i, r in enumerate(records):
        pool = [j for j in (range(len(records)) if shuffle_tasks else by_task[r.task_id]) if j != i]
        if not pool:
            pool = [i]
        for j in rng.choice(pool, size=pairings, replace=len(pool) < pairings):
            demo = records[j].clip
            samples.append(Sample(demo, r.instance_descriptor, r.target, "task",
                                  r.task_id))
    return samples
