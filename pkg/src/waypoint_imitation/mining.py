"""Automatic attribute labels from robot logs: grasp and press detection with box smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AttributedTrajectory, RobotLog
from .errors import InvalidInputError


@dataclass(frozen=True)
class MiningConfig:
    d: int = 10
    delta: float = -0.05
    smooth_width: int = 5
    smooth_threshold: float = 0.5
    press_force_window: int = 3
    press_motion_epsilon: float = 0.002
    press_command_epsilon: float = 0.005

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInputError("lookahead d must be at least 1")
        if self.smooth_width < 1 or self.smooth_width % 2 == 0:
            raise InvalidInputError("smooth_width must be a positive odd integer")
        if not 0 < self.smooth_threshold <= 1:
            raise InvalidInputError("smooth_threshold must lie in (0, 1]")
        if self.press_force_window < 1:
            raise InvalidInputError("press_force_window must be positive")


# lookahead presets reported for other robots' logs
PRESETS = {
    "metaworld": MiningConfig(d=10, delta=-0.05),
    "tosil": MiningConfig(d=1, delta=-0.05),
    "bcz": MiningConfig(d=1, delta=-0.07),
}


def smooth(flags, width: int, threshold: float) -> np.ndarray:
    """Box-filter a boolean sequence (edges replicated) and re-threshold."""
    x = np.asarray(flags, dtype=float)
    if width == 1:
        return x >= threshold
    half = width // 2
    padded = np.pad(x, half, mode="edge")
    avg = np.convolve(padded, np.ones(width) / width, mode="valid")
    # box sums of 0/1 values are multiples of 1/width; guard against rounding at the threshold
    return avg >= threshold - 1e-12


def _lookahead(values, d):
    idx = np.minimum(np.arange(len(values)) + d, len(values) - 1)
    return values[idx]


def raw_grasp_attribute(log: RobotLog, cfg: MiningConfig = MiningConfig()) -> np.ndarray:
    """Unsmoothed ``close_t and (gap[t + d] - gap[t] > delta)``; lookahead clamps to the last frame."""
    if len(log) < 2:
        raise InvalidInputError("log needs at least 2 frames")
    gap = log.gripper_gap
    return log.gripper_close & (_lookahead(gap, cfg.d) - gap > cfg.delta)


def mine_grasp_attribute(log: RobotLog, cfg: MiningConfig = MiningConfig()) -> np.ndarray:
    """Frames where the gripper was told to close but the jaws stayed open enough to hold something."""
    return smooth(raw_grasp_attribute(log, cfg), cfg.smooth_width, cfg.smooth_threshold)


def raw_press_attribute(log: RobotLog, cfg: MiningConfig = MiningConfig()) -> np.ndarray:
    if len(log) < 2:
        raise InvalidInputError("log needs at least 2 frames")
    cmd = log.delta_ee
    norm = np.linalg.norm(cmd, axis=1)
    moving = norm > cfg.press_command_epsilon
    unit = np.zeros_like(cmd)
    unit[moving] = cmd[moving] / norm[moving, None]
    disp = _lookahead(log.ee_position, cfg.press_force_window) - log.ee_position
    progress = np.einsum("ij,ij->i", disp, unit)
    return moving & (progress < cfg.press_motion_epsilon)


def mine_press_attribute(log: RobotLog, cfg: MiningConfig = MiningConfig()) -> np.ndarray:
    """Frames where motion is commanded but the end effector makes no progress along it."""
    return smooth(raw_press_attribute(log, cfg), cfg.smooth_width, cfg.smooth_threshold)


def log_to_attributed_trajectory(log: RobotLog, attribute_sequences) -> AttributedTrajectory:
    T = len(log)
    cols = []
    for seq in attribute_sequences:
        seq = np.asarray(seq)
        if seq.shape != (T,):
            raise InvalidInputError(f"attribute sequence length {seq.shape} does not match log length {T}")
        cols.append(seq.astype(float))
    attrs = np.stack(cols, axis=1) if cols else np.zeros((T, 0))
    return AttributedTrajectory(np.concatenate([log.ee_position, attrs], axis=1))


def mine_trajectory(log: RobotLog, cfg: MiningConfig = MiningConfig(), press: bool = False) -> AttributedTrajectory:
    """Attributed trajectory with the grasp channel, plus the press channel if requested."""
    seqs = [mine_grasp_attribute(log, cfg)]
    if press:
        seqs.append(mine_press_attribute(log, cfg))
    return log_to_attributed_trajectory(log, seqs)


def precision_recall(predicted, truth):
    p = np.asarray(predicted, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall
