"""Minibatch Adam training of the predictor through the multi-resolution soft-DTW loss."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from ..augment import AdmConfig, adm_augment_batch
from ..core import DEFAULT_SAMPLES_PER_SEGMENT, Sample, subsample_indices
from ..errors import InvalidInputError, TrainingDivergedError
from ..sdtw import HEAD_OFFSETS, HEAD_SIZES, TOTAL_WAYPOINTS, SdtwConfig, multiresolution_loss
from .model import SYNTH_HEAD, TASK_HEAD, PredictorModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 30
    iterations: int = 50_000
    seed: int = 0
    sdtw: SdtwConfig = field(default_factory=SdtwConfig)
    samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT
    target_points: Optional[int] = 40  # targets are subsampled to at most this many points
    adm: Optional[AdmConfig] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 500
    final_lr_fraction: float = 1.0  # learning rate decays linearly to this fraction of its start
    data_init: bool = True  # standardize inputs and start each head at the mean target shape

    def __post_init__(self):
        if not self.learning_rate > 0 or self.batch_size < 1 or self.iterations < 0:
            raise InvalidInputError("learning rate, batch size and iterations must be positive")
        if not 0 <= self.final_lr_fraction <= 1:
            raise InvalidInputError("final_lr_fraction must lie in [0, 1]")


@dataclass
class TrainResult:
    model: PredictorModel
    loss_curve: np.ndarray


@numba.njit(cache=True)
def _adam_update(params, grad, m, v, beta1, beta2, step, eps):
    for i in range(params.shape[0]):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        params[i] -= step * m[i] / (math.sqrt(v[i]) + eps)


class Adam:
    def __init__(self, n, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        # bias corrections folded into the step size and epsilon
        c1 = 1 - self.beta1 ** self.t
        c2 = math.sqrt(1 - self.beta2 ** self.t)
        _adam_update(params, grad, self.m, self.v, self.beta1, self.beta2, self.lr * c2 / c1, self.eps * c2)
        return params


def target_array(sample: Sample, target_points: Optional[int]) -> np.ndarray:
    pts = sample.target.points
    if target_points is None or len(pts) <= target_points:
        return np.ascontiguousarray(pts)
    return np.ascontiguousarray(pts[subsample_indices(len(pts), target_points)])


def head_index(sample: Sample) -> int:
    return SYNTH_HEAD if sample.origin == "synthesized" else TASK_HEAD


def naive_waypoints(target: np.ndarray) -> np.ndarray:
    """Each head's waypoints picked evenly along the target, shape ``(15, 3 + k)``."""
    out = []
    for size in HEAD_SIZES:
        idx = np.rint(np.linspace(0, len(target) - 1, size)).astype(int) if size > 1 else [len(target) - 1]
        out.append(target[idx])
    return np.concatenate(out)


def initialize_from_data(model: PredictorModel, dataset, targets: dict, head_weight_scale: float = 0.1) -> None:
    """Fit the input standardization and set each head's bias to its mean naive waypoints."""
    X = np.stack([model.features(s.demo.frames, s.instance_descriptor) for s in dataset])
    model.set_normalization(X)
    v = model.view()
    for head, name in ((TASK_HEAD, "task"), (SYNTH_HEAD, "synth")):
        rows = [naive_waypoints(targets[id(s.target)]) for s in dataset if head_index(s) == head]
        if rows:
            v[f"b_{name}"][...] = np.mean(rows, axis=0).reshape(-1)
        v[f"W_{name}"][...] *= head_weight_scale


def batch_loss_and_grad(model: PredictorModel, samples, cfg: TrainConfig, params=None, targets=None):
    """Mean per-sample loss over the batch and its gradient w.r.t. the flat parameters.

    Each sample's loss is taken on the head selected by its origin.
    """
    X = np.stack([model.features(s.demo.frames, s.instance_descriptor) for s in samples])
    heads = np.array([head_index(s) for s in samples])
    if targets is None:
        targets = [target_array(s, cfg.target_points) for s in samples]
    acts, out_task, out_synth = model.forward(X, params)
    out = np.where((heads == TASK_HEAD)[:, None], out_task, out_synth)
    B = len(samples)
    pd = model.arch.point_dim
    d_out = np.empty_like(out)
    total = 0.0
    for b in range(B):
        loss, g = multiresolution_loss(out[b].reshape(TOTAL_WAYPOINTS, pd), targets[b], cfg.sdtw,
                                       cfg.samples_per_segment)
        total += loss
        d_out[b] = g.reshape(-1)
    grad = model.backward(acts, heads, d_out / B, params)
    return total / B, grad


def train(model: PredictorModel, dataset, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Adam on minibatches drawn with replacement; mixup (if configured) is redrawn per batch."""
    dataset = list(dataset)
    if not dataset:
        raise InvalidInputError("empty training set")
    model = model.copy()
    targets = {}
    for s in dataset:
        key = id(s.target)
        if key not in targets:
            targets[key] = target_array(s, cfg.target_points)
    if cfg.data_init:
        initialize_from_data(model, dataset, targets)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.n_params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    curve = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        batch = [dataset[i] for i in rng.integers(0, len(dataset), cfg.batch_size)]
        if cfg.adm is not None and len(batch) >= 2:
            adm = AdmConfig(cfg.adm.alpha_min, cfg.adm.alpha_max, cfg.adm.apply_probability,
                            int(rng.integers(0, 2 ** 31)))
            batch = adm_augment_batch(batch, adm)
        loss, grad = batch_loss_and_grad(model, batch, cfg, targets=[targets[id(s.target)] for s in batch])
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(f"loss became {loss} at iteration {it}")
        opt.lr = cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * it / max(cfg.iterations, 1))
        opt.step(model.params, grad)
        curve[it] = loss
        if cfg.log_every and (it + 1) % cfg.log_every == 0:
            log.info("iteration %d loss %.5f", it + 1, float(np.mean(curve[max(0, it + 1 - cfg.log_every):it + 1])))
    return TrainResult(model, curve)


def direct_fit(target, cfg: TrainConfig = TrainConfig(), iterations: int = 2000, init=None,
               learning_rate: float = 1e-2) -> tuple[np.ndarray, float]:
    """Fit 15 free waypoints to one target by Adam on the loss itself.

    Serves as a capacity reference for the network: it is the best the
    waypoint parameterization can do for that trajectory.
    """
    Y = np.ascontiguousarray(getattr(target, "points", target))
    if cfg.target_points is not None and len(Y) > cfg.target_points:
        Y = np.ascontiguousarray(Y[subsample_indices(len(Y), cfg.target_points)])
    if init is None:
        idx = np.rint(np.linspace(0, len(Y) - 1, TOTAL_WAYPOINTS)).astype(int)
        init = Y[idx]
    W = np.array(init, dtype=float)
    opt = Adam(W.size, learning_rate)
    flat = W.reshape(-1)
    best = np.inf
    for _ in range(iterations):
        loss, g = multiresolution_loss(flat.reshape(W.shape), Y, cfg.sdtw, cfg.samples_per_segment)
        best = min(best, loss)
        opt.step(flat, g.reshape(-1))
    loss, _ = multiresolution_loss(flat.reshape(W.shape), Y, cfg.sdtw, cfg.samples_per_segment)
    return flat.reshape(W.shape), min(best, loss)
