"""Soft dynamic time warping with analytic gradients, and the multi-resolution waypoint loss.

The cost between a predicted point ``x`` and a target point ``y`` is a
weighted squared Euclidean distance; attribute channels are scaled by
``SdtwConfig.attribute_weight``. The recursion uses the full-alignment
boundary ``r[0, 0] = 0`` and ``r[i, 0] = r[0, j] = +inf``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import AttributedTrajectory, DEFAULT_SAMPLES_PER_SEGMENT, interpolation_matrix
from .errors import InvalidInputError

BIG = 1e30
# exp(-CUTOFF) is far below double resolution relative to the dominant term; skip those terms
CUTOFF = 60.0
HEAD_SIZES = (1, 2, 3, 4, 5)
HEAD_OFFSETS = (0, 1, 3, 6, 10)
TOTAL_WAYPOINTS = 15


@dataclass(frozen=True)
class SdtwConfig:
    gamma: float = 0.001
    cost: str = "squared-euclidean"
    attribute_weight: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInputError("gamma must be positive")
        if not self.attribute_weight >= 0:
            raise InvalidInputError("attribute_weight must be nonnegative")
        if self.cost != "squared-euclidean":
            raise InvalidInputError(f"unsupported cost {self.cost!r}")


@dataclass(frozen=True)
class SdtwResult:
    value: float
    alignment_gradient: np.ndarray
    input_gradient: np.ndarray


def softmin(values, gamma: float) -> float:
    """``-gamma * log(sum(exp(-v / gamma)))`` evaluated with a max shift."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise InvalidInputError("softmin of an empty list")
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    m = v.min()
    return float(m - gamma * np.log(np.sum(np.exp(-(v - m) / gamma))))


@numba.njit(cache=True)
def _softmin3(a, b, c, gamma):
    m = min(a, min(b, c))
    if m >= BIG:
        return BIG
    s = 0.0
    za = (a - m) / gamma
    zb = (b - m) / gamma
    zc = (c - m) / gamma
    if za < CUTOFF:
        s += math.exp(-za)
    if zb < CUTOFF:
        s += math.exp(-zb)
    if zc < CUTOFF:
        s += math.exp(-zc)
    if s == 1.0:
        return m
    return m - gamma * math.log(s)


@numba.njit(cache=True)
def _cost_matrix(X, Y, w):
    n, d = X.shape
    m = Y.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for c in range(d):
                diff = X[i, c] - Y[j, c]
                acc += w[c] * diff * diff
            D[i, j] = acc
    return D


@numba.njit(cache=True)
def _forward(D, gamma):
    n, m = D.shape
    R = np.full((n + 2, m + 2), BIG)
    R[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            R[i, j] = D[i - 1, j - 1] + _softmin3(R[i - 1, j], R[i, j - 1], R[i - 1, j - 1], gamma)
    return R


@numba.njit(cache=True)
def _backward(D, R, gamma):
    n, m = D.shape
    Dp = np.zeros((n + 2, m + 2))
    Dp[1:n + 1, 1:m + 1] = D
    Rb = R.copy()
    for i in range(n + 2):
        Rb[i, m + 1] = -np.inf
    for j in range(m + 2):
        Rb[n + 1, j] = -np.inf
    Rb[n + 1, m + 1] = R[n, m]
    E = np.zeros((n + 2, m + 2))
    E[n + 1, m + 1] = 1.0
    for j in range(m, 0, -1):
        for i in range(n, 0, -1):
            r = Rb[i, j]
            acc = 0.0
            if E[i + 1, j] != 0.0:
                z = (Rb[i + 1, j] - r - Dp[i + 1, j]) / gamma
                if z > -CUTOFF:
                    acc += E[i + 1, j] * math.exp(z)
            if E[i, j + 1] != 0.0:
                z = (Rb[i, j + 1] - r - Dp[i, j + 1]) / gamma
                if z > -CUTOFF:
                    acc += E[i, j + 1] * math.exp(z)
            if E[i + 1, j + 1] != 0.0:
                z = (Rb[i + 1, j + 1] - r - Dp[i + 1, j + 1]) / gamma
                if z > -CUTOFF:
                    acc += E[i + 1, j + 1] * math.exp(z)
            E[i, j] = acc
    return E[1:n + 1, 1:m + 1]


@numba.njit(cache=True)
def _value_and_grad(X, Y, w, gamma):
    D = _cost_matrix(X, Y, w)
    R = _forward(D, gamma)
    E = _backward(D, R, gamma)
    n, d = X.shape
    m = Y.shape[0]
    G = np.zeros((n, d))
    for i in range(n):
        for j in range(m):
            e = E[i, j]
            if e != 0.0:
                for c in range(d):
                    G[i, c] += 2.0 * w[c] * e * (X[i, c] - Y[j, c])
    return R[n, m], E, G


def _points(traj) -> np.ndarray:
    if isinstance(traj, AttributedTrajectory):
        return np.ascontiguousarray(traj.points, dtype=float)
    arr = np.ascontiguousarray(traj, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _prepare(pred, target, cfg):
    X = _points(pred)
    Y = _points(target)
    if X.shape[0] < 1 or Y.shape[0] < 1:
        raise InvalidInputError("trajectories must be nonempty")
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return X, Y, channel_weights(X.shape[1], cfg)


def channel_weights(dim: int, cfg: SdtwConfig) -> np.ndarray:
    w = np.ones(dim)
    w[3:] = cfg.attribute_weight
    return w


def sdtw_forward(pred, target, cfg: SdtwConfig = SdtwConfig()) -> float:
    X, Y, w = _prepare(pred, target, cfg)
    R = _forward(_cost_matrix(X, Y, w), cfg.gamma)
    return float(R[X.shape[0], Y.shape[0]])


def sdtw_backward(pred, target, cfg: SdtwConfig = SdtwConfig()) -> SdtwResult:
    """Value, expected alignment matrix and gradient with respect to ``pred``."""
    X, Y, w = _prepare(pred, target, cfg)
    value, E, G = _value_and_grad(X, Y, w, cfg.gamma)
    return SdtwResult(float(value), E, G)


def split_heads(waypoints) -> list[np.ndarray]:
    """Split the 15 stacked waypoints into the 1, 2, 3, 4 and 5 waypoint trajectories."""
    W = np.asarray(waypoints, dtype=float)
    if W.ndim != 2 or W.shape[0] != TOTAL_WAYPOINTS:
        raise InvalidInputError(f"expected {TOTAL_WAYPOINTS} waypoints, got {W.shape[0] if W.ndim else 0}")
    return [W[o:o + s] for o, s in zip(HEAD_OFFSETS, HEAD_SIZES)]


def multiresolution_loss(heads_output, target, cfg: SdtwConfig = SdtwConfig(),
                         samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT):
    """Mean soft-DTW over the five interpolated trajectories and its gradient per waypoint.

    Returns ``(loss, grad)`` with ``grad`` shaped like ``heads_output`` (15, 3 + k).
    """
    if not isinstance(heads_output, np.ndarray):
        heads_output = np.stack([getattr(w, "vector", w) for w in heads_output])
    W = np.asarray(heads_output, dtype=float)
    Y = _points(target)
    if W.ndim != 2 or W.shape[0] != TOTAL_WAYPOINTS:
        raise InvalidInputError(f"expected {TOTAL_WAYPOINTS} waypoints")
    if W.shape[1] != Y.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {W.shape[1]} vs {Y.shape[1]}")
    w = channel_weights(W.shape[1], cfg)
    grad = np.empty_like(W)
    total = 0.0
    for offset, size in zip(HEAD_OFFSETS, HEAD_SIZES):
        M = _head_matrix(size, samples_per_segment)
        dense = M @ W[offset:offset + size]
        value, _, G = _value_and_grad(dense, Y, w, cfg.gamma)
        total += value
        grad[offset:offset + size] = M.T @ G
    n_heads = len(HEAD_SIZES)
    return total / n_heads, grad / n_heads


@functools.lru_cache(maxsize=64)
def _head_matrix(size: int, samples_per_segment: int) -> np.ndarray:
    M = interpolation_matrix(size, samples_per_segment)
    M.setflags(write=False)
    return M
