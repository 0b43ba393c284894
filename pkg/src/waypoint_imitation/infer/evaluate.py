"""Held-out success-rate evaluation: demo on one instance, execution on another."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import scene_to_descriptor
from ..datasets import record_from_episode
from ..mining import MiningConfig
from ..primitives import Rollout, execute_waypoints
from ..sim.expert import generate_expert_episode
from ..sim.world import Simulator
from ..tasks import TaskFamily, task_success
from .model import PredictorModel, predict_for_execution
from .oracle import oracle_predict


class OraclePredictor:
    """Waypoints from ground truth; an upper bound for the learned model."""

    def __call__(self, scene, task, record, sim):
        return oracle_predict(scene, task, sim)


class ModelPredictor:
    def __init__(self, model: PredictorModel):
        self.model = model

    def __call__(self, scene, task, record, sim):
        return predict_for_execution(self.model, record.clip, scene_to_descriptor(scene), scene.workspace)


@dataclass
class EvalReport:
    per_task: dict
    per_task_se: dict
    mean: float
    se: float
    episodes: int
    outcomes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"per_task": self.per_task, "per_task_se": self.per_task_se, "mean": self.mean,
                "se": self.se, "episodes": self.episodes}


def binomial_se(outcomes) -> float:
    x = np.asarray(outcomes, dtype=float)
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1) / np.sqrt(x.size))


def run_episode(predictor, family, task, seed, index, mining=MiningConfig()) -> bool:
    sim = Simulator()
    rng = np.random.default_rng((seed, index))
    scene = family.sample_scene(rng)
    for _ in range(5):
        demo_ep = generate_expert_episode(task, family.sample_scene(rng), sim)
        if demo_ep.success:
            break
    record = record_from_episode(demo_ep, mining)
    waypoints = predictor(scene, task, record, sim)
    result = execute_waypoints(Rollout(sim, sim.reset(scene), record_descriptors=False), waypoints)
    return task_success(task, result.state, sim)


def _run(args):
    return run_episode(*args)


def evaluate(predictor, tasks, episodes_per_task: int = 20, family: TaskFamily = None, seed: int = 0,
             jobs: int = 1, mining: MiningConfig = MiningConfig()) -> EvalReport:
    """Success rate per task over fresh instances, each with a demo on a different instance."""
    family = family or TaskFamily()
    if isinstance(predictor, PredictorModel):
        predictor = ModelPredictor(predictor)
    args = [(predictor, family, task, seed, t * 1_000_000 + e, mining)
            for t, task in enumerate(tasks) for e in range(episodes_per_task)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(_run, args, chunksize=4))
    else:
        flat = [_run(a) for a in args]
    outcomes = {}
    for (_, _, task, _, _, _), ok in zip(args, flat):
        outcomes.setdefault(task.task_id, []).append(bool(ok))
    per_task = {k: float(np.mean(v)) for k, v in outcomes.items()}
    per_task_se = {k: binomial_se(v) for k, v in outcomes.items()}
    all_outcomes = [o for v in outcomes.values() for o in v]
    return EvalReport(per_task, per_task_se, float(np.mean(all_outcomes)), binomial_se(all_outcomes),
                      len(all_outcomes), outcomes)
