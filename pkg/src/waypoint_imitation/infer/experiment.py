"""Held-out ablation: full model (mixup + synthesized data) against a plain
model and an untrained one, over several training seeds."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..augment import AdmConfig, synthesize_trajectories
from ..datasets import collect_expert_records, pair_records
from ..tasks import TaskFamily
from .evaluate import binomial_se, evaluate
from .model import PredictorModel
from .train import TrainConfig, train

log = logging.getLogger(__name__)

VARIANTS = ("untrained", "ablation", "full")


@dataclass(frozen=True)
class AblationConfig:
    seeds: tuple = (0, 1, 2, 3, 4)
    episodes_per_task: int = 50
    pairings: int = 10
    synth_count: int = 500
    iterations: int = 10_000
    learning_rate: float = 2e-3
    final_lr_fraction: float = 0.05
    eval_episodes: int = 20
    heldout_tasks: int = 2
    split_seed: int = 0
    data_seed: int = 0
    adm: AdmConfig = field(default_factory=AdmConfig)
    jobs: int = 1


@dataclass
class AblationResult:
    heldout: list
    outcomes: dict  # variant -> seed -> list of bools
    wall_time: float

    def pooled(self, variant) -> list:
        return [o for s in sorted(self.outcomes[variant]) for o in self.outcomes[variant][s]]

    def mean(self, variant) -> float:
        return float(np.mean(self.pooled(variant)))

    def se(self, variant) -> float:
        return binomial_se(self.pooled(variant))

    def per_seed(self, variant) -> dict:
        return {s: float(np.mean(v)) for s, v in sorted(self.outcomes[variant].items())}

    def margin_over_ablation(self) -> tuple[float, float]:
        """Full minus ablation success and the combined standard error."""
        diff = self.mean("full") - self.mean("ablation")
        return diff, float(np.hypot(self.se("full"), self.se("ablation")))

    def summary(self) -> dict:
        diff, se = self.margin_over_ablation()
        return {
            "heldout_tasks": [t.task_id for t in self.heldout],
            **{f"{v}_success": self.mean(v) for v in VARIANTS},
            **{f"{v}_se": self.se(v) for v in VARIANTS},
            **{f"{v}_per_seed": self.per_seed(v) for v in VARIANTS},
            "full_minus_ablation": diff,
            "combined_se": se,
            "full_minus_untrained": self.mean("full") - self.mean("untrained"),
            "wall_time": self.wall_time,
        }


def run_ablation(cfg: AblationConfig = AblationConfig(), family: TaskFamily = None) -> AblationResult:
    """Train both variants per seed on one shared expert dataset and evaluate on held-out tasks.

    Each seed changes the network initialization, the minibatch order, the
    mixup draws and the evaluation instances.
    """
    start = time.perf_counter()
    family = family or TaskFamily()
    train_tasks, heldout = family.split(cfg.heldout_tasks, seed=cfg.split_seed)
    records = collect_expert_records(family, train_tasks, cfg.episodes_per_task, cfg.data_seed, jobs=cfg.jobs)
    samples = pair_records(records, cfg.pairings, seed=cfg.data_seed)
    synth = synthesize_trajectories(cfg.synth_count, family=family, seed=cfg.data_seed)
    log.info("%d records, %d samples, %d synthesized", len(records), len(samples), len(synth))
    outcomes: dict = {v: {} for v in VARIANTS}
    for seed in cfg.seeds:
        base = TrainConfig(learning_rate=cfg.learning_rate, iterations=cfg.iterations, seed=seed,
                           final_lr_fraction=cfg.final_lr_fraction, log_every=max(cfg.iterations // 5, 1))
        adm = AdmConfig(cfg.adm.alpha_min, cfg.adm.alpha_max, cfg.adm.apply_probability, seed)
        models = {
            "untrained": PredictorModel(seed=seed),
            "ablation": train(PredictorModel(seed=seed), samples, base).model,
            "full": train(PredictorModel(seed=seed), samples + synth,
                          replace(base, adm=adm)).model,
        }
        for variant, model in models.items():
            report = evaluate(model, heldout, cfg.eval_episodes, family, seed=seed, jobs=cfg.jobs)
            outcomes[variant][seed] = [o for t in sorted(report.outcomes) for o in report.outcomes[t]]
            log.info("seed %d %s success %.3f", seed, variant, report.mean)
    return AblationResult(heldout, outcomes, time.perf_counter() - start)
