"""Training-set augmentation that decorrelates tasks from their scene context.

Asymmetric demonstration mixup blends every frame of a demonstration with the
*first* frame of another sample's demonstration while keeping the original
target. Trajectory synthesis drives the arm through random workspace points
and pairs each resulting trajectory with itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AttributedTrajectory, DemonstrationClip, Sample, Workspace, make_clip
from .errors import InvalidInputError
from .primitives import PrimitiveConfig, Rollout, run_free_space
from .sim.arm import inverse_kinematics
from .sim.world import Simulator
from .tasks import TaskFamily

SYNTH_TASK_ID = "synthesized"


@dataclass(frozen=True)
class AdmConfig:
    alpha_min: float = 0.3
    alpha_max: float = 1.0
    apply_probability: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max <= 1:
            raise InvalidInputError("need 0 < alpha_min <= alpha_max <= 1")
        if not 0 <= self.apply_probability <= 1:
            raise InvalidInputError("apply_probability must lie in [0, 1]")


def adm_mix(sample: Sample, other: Sample, alpha: float) -> Sample:
    """Blend ``sample``'s demo with ``other``'s first demo frame; the target is kept as is."""
    if sample.demo.frames.shape[1] != other.demo.frames.shape[1]:
        raise InvalidInputError("demonstration frame dimensions differ")
    if sample.instance_descriptor.shape != other.instance_descriptor.shape:
        raise InvalidInputError("instance descriptor dimensions differ")
    if not 0 <= alpha <= 1:
        raise InvalidInputError("alpha must lie in [0, 1]")
    frames = alpha * sample.demo.frames + (1.0 - alpha) * other.demo.frames[0]
    instance = alpha * sample.instance_descriptor + (1.0 - alpha) * other.instance_descriptor
    demo = DemonstrationClip(frames, sample.demo.source_trajectory, sample.demo.origin)
    return Sample(demo, instance, sample.target, sample.origin, sample.task_id)


@dataclass(frozen=True)
class MixDraw:
    index: int
    partner: Optional[int]
    alpha: Optional[float]


def draw_adm_plan(n: int, cfg: AdmConfig) -> list[MixDraw]:
    """Per-sample mixing decisions, each drawn from a sub-seed ``(rng_seed, index)``."""
    if n < 2 and cfg.apply_probability > 0:
        raise InvalidInputError("mixup needs at least 2 samples")
    plan = []
    for i in range(n):
        rng = np.random.default_rng((cfg.rng_seed, i))
        if cfg.apply_probability > 0 and rng.random() < cfg.apply_probability:
            partner = int(rng.integers(0, n - 1))
            partner += partner >= i  # uniform over the other samples
            alpha = float(rng.uniform(cfg.alpha_min, cfg.alpha_max))
            plan.append(MixDraw(i, partner, alpha))
        else:
            plan.append(MixDraw(i, None, None))
    return plan


def adm_augment_batch(samples, cfg: AdmConfig = AdmConfig()) -> list[Sample]:
    samples = list(samples)
    plan = draw_adm_plan(len(samples), cfg)
    return [samples[d.index] if d.partner is None else adm_mix(samples[d.index], samples[d.partner], d.alpha)
            for d in plan]


def _reachable(sim, point, q0) -> bool:
    try:
        inverse_kinematics(sim.arm, point, q0)
    except (ValueError, RuntimeError):
        return False
    return True


def synthesize_trajectory(rng: np.random.Generator, sim: Simulator, family: TaskFamily,
                          points_min: int = 1, points_max: int = 3, workspace: Optional[Workspace] = None,
                          max_retries: int = 50, cfg: PrimitiveConfig = PrimitiveConfig()) -> Sample:
    """One self-paired free-space sample through 1 to 3 uniformly random workspace points."""
    if not 1 <= points_min <= points_max:
        raise InvalidInputError("need 1 <= points_min <= points_max")
    scene = family.sample_scene(rng)
    ws = workspace or scene.workspace
    lo, hi = np.asarray(ws.lo), np.asarray(ws.hi)
    n_points = int(rng.integers(points_min, points_max + 1))
    for _ in range(max_retries):
        points = []
        while len(points) < n_points:
            for _ in range(max_retries):
                p = rng.uniform(lo, hi)
                if _reachable(sim, p, sim.home_angles):
                    points.append(p)
                    break
            else:
                raise InvalidInputError("could not sample a reachable point")
        ro = Rollout(sim, sim.reset(scene))
        if all(run_free_space(ro, p, cfg).success for p in points):
            ro.finish()
            log = ro.robot_log()
            target = AttributedTrajectory(np.concatenate([log.ee_position, np.zeros((len(log), 1))], axis=1))
            desc = ro.descriptors()
            demo = make_clip(desc, target, "synthesized")
            return Sample(demo, desc[0], target, "synthesized", SYNTH_TASK_ID)
    raise InvalidInputError("free-space motion kept failing; giving up")


def synthesize_trajectories(count: int, points_min: int = 1, points_max: int = 3, workspace=None,
                            sim: Optional[Simulator] = None, family: Optional[TaskFamily] = None,
                            seed: int = 0) -> list[Sample]:
    sim = sim or Simulator()
    family = family or TaskFamily()
    return [synthesize_trajectory(np.random.default_rng((seed, i)), sim, family, points_min, points_max, workspace)
            for i in range(count)]
