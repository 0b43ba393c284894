"""Yaw-pitch-pitch arm: closed-form forward kinematics and damped-least-squares IK."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, InvalidInputError, UnreachableError

LIMIT_TOL = 1e-9


@dataclass(frozen=True)
class ArmModel:
    """Base yaw, shoulder pitch and elbow pitch joints.

    ``link_lengths[0]`` is the horizontal offset from the yaw axis to the
    shoulder; the other two links form the pitching arm. At zero angles every
    link points along the base's +x axis.
    """

    link_lengths: tuple = (0.1, 0.3, 0.3)
    joint_limits: tuple = ((-np.pi, np.pi), (-np.pi / 2, np.pi / 2), (-3.0, 0.0))
    max_ee_step: float = 0.02
    base: tuple = (0.0, 0.0, 0.2)
    damping: float = 0.05
    max_iterations: int = 200
    joint_step_clamp: float = 0.2

    def __post_init__(self):
        if len(self.link_lengths) != 3 or any(l <= 0 for l in self.link_lengths):
            raise InvalidInputError("need three positive link lengths")
        if any(lo >= hi for lo, hi in self.joint_limits):
            raise InvalidInputError("joint limits must be nonempty intervals")

    @property
    def reach(self) -> float:
        return self.link_lengths[1] + self.link_lengths[2]

    @property
    def min_reach(self) -> float:
        _, l2, l3 = self.link_lengths
        lo, hi = self.joint_limits[2]
        # folding is tightest at the elbow limit farthest from zero
        bend = max(abs(lo), abs(hi))
        return float(np.sqrt(max(l2 * l2 + l3 * l3 + 2 * l2 * l3 * np.cos(bend), 0.0)))

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.joint_limits])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.joint_limits])

    def within_limits(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower - LIMIT_TOL) and np.all(q <= self.upper + LIMIT_TOL))


def _planar(arm, q):
    l1, l2, l3 = arm.link_lengths
    radial = l1 + l2 * np.cos(q[1]) + l3 * np.cos(q[1] + q[2])
    height = l2 * np.sin(q[1]) + l3 * np.sin(q[1] + q[2])
    return radial, height


def _fk(arm, q):
    radial, height = _planar(arm, q)
    b = arm.base
    return np.array([b[0] + radial * np.cos(q[0]), b[1] + radial * np.sin(q[0]), b[2] + height])


def forward_kinematics(arm: ArmModel, joint_angles) -> np.ndarray:
    q = np.asarray(joint_angles, dtype=float)
    if q.shape != (3,):
        raise InvalidInputError("need three joint angles")
    if not arm.within_limits(q):
        raise InvalidInputError(f"joint angles {q.tolist()} violate the joint limits")
    return _fk(arm, q)


def jacobian(arm: ArmModel, joint_angles) -> np.ndarray:
    """Analytic 3x3 derivative of the end-effector position."""
    q = np.asarray(joint_angles, dtype=float)
    _, l2, l3 = arm.link_lengths
    radial, _ = _planar(arm, q)
    c1, s1 = np.cos(q[0]), np.sin(q[0])
    s2, c2 = np.sin(q[1]), np.cos(q[1])
    s23, c23 = np.sin(q[1] + q[2]), np.cos(q[1] + q[2])
    dr2, dz2 = -l2 * s2 - l3 * s23, l2 * c2 + l3 * c23
    dr3, dz3 = -l3 * s23, l3 * c23
    return np.array([
        [-radial * s1, c1 * dr2, c1 * dr3],
        [radial * c1, s1 * dr2, s1 * dr3],
        [0.0, dz2, dz3],
    ])


def shoulder_distance(arm: ArmModel, target) -> float:
    """Distance from the target to the nearest point the shoulder can occupy."""
    t = np.asarray(target, dtype=float) - np.asarray(arm.base)
    rho = np.hypot(t[0], t[1])
    return float(np.hypot(rho - arm.link_lengths[0], t[2]))


def dls_solve(arm: ArmModel, target, initial_angles, tol=1e-9, max_iterations=None, damping=None):
    """Run damped least squares from ``initial_angles``.

    Returns ``(angles, residual, iterations)`` for the best iterate; never raises.
    """
    target = np.asarray(target, dtype=float)
    q = np.clip(np.asarray(initial_angles, dtype=float), arm.lower, arm.upper)
    lam2 = (arm.damping if damping is None else damping) ** 2
    best_q, best_res = q, np.inf
    n_iter = arm.max_iterations if max_iterations is None else max_iterations
    for it in range(n_iter + 1):
        err = target - _fk(arm, q)
        res = float(np.sqrt(err @ err))
        if res < best_res:
            best_q, best_res = q, res
        if res < tol or it == n_iter:
            break
        J = jacobian(arm, q)
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(3), err)
        peak = np.max(np.abs(dq))
        if peak > arm.joint_step_clamp:
            dq *= arm.joint_step_clamp / peak
        q = np.clip(q + dq, arm.lower, arm.upper)
    return best_q, best_res, it


_FALLBACK_SEEDS = ((0.0, 0.8, -1.6), (0.0, 0.3, -0.6), (0.0, 1.2, -2.5))


def inverse_kinematics(arm: ArmModel, target, initial_angles, tol=1e-6) -> np.ndarray:
    """Joint angles placing the end effector at ``target`` (residual below ``tol``).

    Raises :class:`UnreachableError` when the target lies outside the reachable
    annulus and :class:`ConvergenceError` when damped least squares stalls.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (3,) or not np.all(np.isfinite(target)):
        raise InvalidInputError("target must be a finite 3-vector")
    d = shoulder_distance(arm, target)
    if d > arm.reach:
        raise UnreachableError("target beyond maximum reach", d - arm.reach)
    if d < arm.min_reach:
        raise UnreachableError("target inside minimum reach", arm.min_reach - d)
    yaw = np.arctan2(target[1] - arm.base[1], target[0] - arm.base[0])
    tried = []
    for start in (initial_angles,) + tuple((yaw,) + seed[1:] for seed in _FALLBACK_SEEDS):
        q, res, _ = dls_solve(arm, target, start, tol=tol)
        if res < tol:
            return q
        tried.append((res, q))
    # damping slows the final approach near a straight or folded elbow: polish the closest attempts
    for near, q in sorted(tried, key=lambda t: t[0]):
        if near > 1e-3 * arm.reach:
            break
        q, res, _ = dls_solve(arm, target, q, tol=tol, max_iterations=50, damping=1e-4)
        if res < tol:
            return q
    raise ConvergenceError(f"IK did not converge: residual {res:.2e} m after {arm.max_iterations} iterations")
