"""Domain types shared by every module, waypoint interpolation and scene descriptors.

Trajectories are stored as ``(T, 3 + k)`` float arrays: three position
channels in meters followed by ``k`` attribute channels in ``[0, 1]``.
Channel 3 (attribute 0) means "object in gripper".
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CapacityError, InvalidInputError

MAX_OBJECTS = 6
MAX_BINS = 6
OBJECT_SLOT = MAX_OBJECTS + 3  # one-hot id followed by position
DESCRIPTOR_DIM = MAX_OBJECTS * OBJECT_SLOT + MAX_BINS * 3
DEMO_FRAMES = 10
DEFAULT_SAMPLES_PER_SEGMENT = 10
ORIGINS = ("task", "synthesized")


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class AttributedWaypoint:
    position: np.ndarray
    attributes: np.ndarray

    def __post_init__(self):
        pos = _frozen(self.position).reshape(-1)
        attrs = _frozen(self.attributes).reshape(-1)
        if pos.shape != (3,):
            raise InvalidInputError(f"position must have 3 entries, got {pos.shape[0]}")
        if not np.all(np.isfinite(pos)):
            raise InvalidInputError("position must be finite")
        if not np.all((attrs >= 0.0) & (attrs <= 1.0)):
            raise InvalidInputError("attributes must lie in [0, 1]")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "attributes", attrs)

    @property
    def k(self) -> int:
        return self.attributes.shape[0]

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.attributes])

    @classmethod
    def from_vector(cls, vector) -> "AttributedWaypoint":
        v = np.asarray(vector, dtype=float).reshape(-1)
        return cls(v[:3], v[3:])

    def __eq__(self, other):
        if not isinstance(other, AttributedWaypoint):
            return NotImplemented
        return np.array_equal(self.vector, other.vector)

    def __repr__(self):
        return f"AttributedWaypoint(position={self.position.tolist()}, attributes={self.attributes.tolist()})"


@dataclass(frozen=True, eq=False)
class AttributedTrajectory:
    """Dense time series of attributed points, shape ``(T, 3 + k)``."""

    points: np.ndarray
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 3:
            raise InvalidInputError(f"points must be a (T>=1, 3+k) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts[:, :3])):
            raise InvalidInputError("positions must be finite")
        attrs = pts[:, 3:]
        if not np.all((attrs >= 0.0) & (attrs <= 1.0)):
            raise InvalidInputError("attributes must lie in [0, 1]")
        object.__setattr__(self, "points", pts)
        if self.timestamps is not None:
            ts = _frozen(self.timestamps).reshape(-1)
            if ts.shape[0] != pts.shape[0]:
                raise InvalidInputError("timestamps length must match points")
            if np.any(np.diff(ts) <= 0):
                raise InvalidInputError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1] - 3

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def attributes(self) -> np.ndarray:
        return self.points[:, 3:]

    def waypoints(self) -> list[AttributedWaypoint]:
        return [AttributedWaypoint.from_vector(p) for p in self.points]

    def __eq__(self, other):
        if not isinstance(other, AttributedTrajectory):
            return NotImplemented
        if not np.array_equal(self.points, other.points):
            return False
        if (self.timestamps is None) != (other.timestamps is None):
            return False
        return self.timestamps is None or np.array_equal(self.timestamps, other.timestamps)

    def __repr__(self):
        return f"AttributedTrajectory(T={len(self)}, k={self.k})"


@dataclass(frozen=True, eq=False)
class RobotLog:
    """Per-step robot states and the actions commanded from them.

    Row ``t`` of the state arrays is the state *before* action ``t``.
    """

    joint_angles: np.ndarray
    gripper_gap: np.ndarray
    ee_position: np.ndarray
    delta_ee: np.ndarray
    gripper_close: np.ndarray

    def __post_init__(self):
        q = _frozen(self.joint_angles)
        gap = _frozen(self.gripper_gap).reshape(-1)
        ee = _frozen(self.ee_position)
        dee = _frozen(self.delta_ee)
        close = _frozen(self.gripper_close, dtype=bool).reshape(-1)
        T = gap.shape[0]
        if T < 2:
            raise InvalidInputError("a robot log needs at least 2 frames")
        if q.ndim != 2 or q.shape[0] != T or ee.shape != (T, 3) or dee.shape != (T, 3) or close.shape != (T,):
            raise InvalidInputError("robot log arrays must share length T")
        if np.any(gap < 0):
            raise InvalidInputError("gripper gap must be nonnegative")
        for name, value in (("joint_angles", q), ("gripper_gap", gap), ("ee_position", ee),
                            ("delta_ee", dee), ("gripper_close", close)):
            object.__setattr__(self, name, value)

    def __len__(self):
        return self.gripper_gap.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RobotLog):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("joint_angles", "gripper_gap", "ee_position", "delta_ee", "gripper_close"))


@dataclass(frozen=True)
class Workspace:
    lo: tuple = (0.1, -0.3, 0.0)
    hi: tuple = (0.6, 0.3, 0.4)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(a >= b for a, b in zip(lo, hi)):
            raise InvalidInputError("workspace needs lo < hi in every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, point, tol=1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= np.asarray(self.lo) - tol) and np.all(p <= np.asarray(self.hi) + tol))

    def clip(self, point) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float), self.lo, self.hi)

    def octant(self, point) -> int:
        mid = (np.asarray(self.lo) + np.asarray(self.hi)) / 2
        bits = np.asarray(point) >= mid
        return int(bits[0]) + 2 * int(bits[1]) + 4 * int(bits[2])


@dataclass(frozen=True)
class SceneObject:
    """A sphere or cube resting on the ground; ``size`` is its full width (diameter or side)."""

    id: int
    shape: str
    size: float
    position: tuple

    def __post_init__(self):
        if self.shape not in ("sphere", "box"):
            raise InvalidInputError(f"unknown shape {self.shape!r}")
        if not self.size > 0:
            raise InvalidInputError("object size must be positive")
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3:
            raise InvalidInputError("object position must have 3 entries")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "size", float(self.size))
        object.__setattr__(self, "position", pos)

    @property
    def half_height(self) -> float:
        return self.size / 2.0


@dataclass(frozen=True)
class Bin:
    """Axis-aligned placement region; ``extent`` holds full side lengths."""

    id: int
    center: tuple
    extent: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        e = tuple(float(v) for v in self.extent)
        if len(c) != 3 or len(e) != 3 or any(v <= 0 for v in e):
            raise InvalidInputError("bin needs a 3D center and positive extent")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "extent", e)

    def contains(self, point) -> bool:
        d = np.abs(np.asarray(point, dtype=float) - np.asarray(self.center))
        return bool(np.all(d <= np.asarray(self.extent) / 2.0))


@dataclass(frozen=True)
class Scene:
    objects: tuple = ()
    bins: tuple = ()
    arm_base: tuple = (0.0, 0.0, 0.2)
    workspace: Workspace = field(default_factory=Workspace)

    def __post_init__(self):
        objects = tuple(self.objects)
        bins = tuple(self.bins)
        object.__setattr__(self, "objects", objects)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "arm_base", tuple(float(v) for v in self.arm_base))
        ids = [o.id for o in objects]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("object ids must be unique")
        bin_ids = [b.id for b in bins]
        if len(set(bin_ids)) != len(bin_ids):
            raise InvalidInputError("bin ids must be unique")
        for o in objects:
            if not self.workspace.contains(o.position):
                raise InvalidInputError(f"object {o.id} lies outside the workspace")

    def object_by_id(self, object_id) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise InvalidInputError(f"no object with id {object_id}")

    def bin_by_id(self, bin_id) -> Bin:
        for b in self.bins:
            if b.id == bin_id:
                return b
        raise InvalidInputError(f"no bin with id {bin_id}")

    def with_object_position(self, object_id, position) -> "Scene":
        objects = tuple(replace(o, position=tuple(position)) if o.id == object_id else o
                        for o in self.objects)
        return replace(self, objects=objects)


def scene_to_descriptor(scene: Scene) -> np.ndarray:
    """Encode a scene as a fixed-length vector of size :data:`DESCRIPTOR_DIM`.

    Objects fill slots in ascending id order, each slot holding a one-hot id
    followed by the object position. Bin centers follow in ascending id order.
    Unused slots are zero.
    """
    if len(scene.objects) > MAX_OBJECTS:
        raise CapacityError(f"scene has {len(scene.objects)} objects, max is {MAX_OBJECTS}")
    if len(scene.bins) > MAX_BINS:
        raise CapacityError(f"scene has {len(scene.bins)} bins, max is {MAX_BINS}")
    out = np.zeros(DESCRIPTOR_DIM)
    for slot, obj in enumerate(sorted(scene.objects, key=lambda o: o.id)):
        if not 0 <= obj.id < MAX_OBJECTS:
            raise CapacityError(f"object id {obj.id} does not fit the one-hot layout")
        base = slot * OBJECT_SLOT
        out[base + obj.id] = 1.0
        out[base + MAX_OBJECTS: base + OBJECT_SLOT] = obj.position
    offset = MAX_OBJECTS * OBJECT_SLOT
    for slot, b in enumerate(sorted(scene.bins, key=lambda b: b.id)):
        out[offset + 3 * slot: offset + 3 * slot + 3] = b.center
    return out


def object_position_slice(slot: int) -> slice:
    base = slot * OBJECT_SLOT + MAX_OBJECTS
    return slice(base, base + 3)


@dataclass(frozen=True, eq=False)
class DemonstrationClip:
    """Ten demonstration frames, each a scene descriptor joined with the demonstrator's EE state."""

    frames: np.ndarray
    source_trajectory: AttributedTrajectory
    origin: str = "task"

    def __post_init__(self):
        frames = _frozen(self.frames)
        if frames.ndim != 2 or frames.shape[0] != DEMO_FRAMES:
            raise InvalidInputError(f"a demonstration clip has exactly {DEMO_FRAMES} frames")
        if self.origin not in ORIGINS:
            raise InvalidInputError(f"origin must be one of {ORIGINS}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_dim(self) -> int:
        return self.frames.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DemonstrationClip):
            return NotImplemented
        return (np.array_equal(self.frames, other.frames) and self.origin == other.origin
                and self.source_trajectory == other.source_trajectory)


def subsample_indices(length: int, count: int = DEMO_FRAMES) -> np.ndarray:
    """Indices of ``count`` frames spread uniformly over ``length`` time steps."""
    return np.rint(np.linspace(0, length - 1, count)).astype(int)


def make_clip(descriptors, trajectory: AttributedTrajectory, origin="task") -> DemonstrationClip:
    """Build a clip from per-step scene descriptors ``(T, D)`` and the matching trajectory."""
    descriptors = np.asarray(descriptors, dtype=float)
    if descriptors.shape[0] != len(trajectory):
        raise InvalidInputError("need one descriptor per trajectory step")
    idx = subsample_indices(len(trajectory))
    frames = np.concatenate([descriptors[idx], trajectory.points[idx]], axis=1)
    return DemonstrationClip(frames, trajectory, origin)


@dataclass(frozen=True, eq=False)
class Sample:
    demo: DemonstrationClip
    instance_descriptor: np.ndarray
    target: AttributedTrajectory
    origin: str = "task"
    task_id: Optional[str] = None

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise InvalidInputError(f"origin must be one of {ORIGINS}")
        if self.origin != self.demo.origin:
            raise InvalidInputError("sample origin must match its demonstration origin")
        object.__setattr__(self, "instance_descriptor", _frozen(self.instance_descriptor).reshape(-1))

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (self.demo == other.demo and self.target == other.target and self.origin == other.origin
                and self.task_id == other.task_id
                and np.array_equal(self.instance_descriptor, other.instance_descriptor))


def _as_waypoint_array(waypoints) -> np.ndarray:
    if isinstance(waypoints, np.ndarray):
        arr = np.asarray(waypoints, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
    else:
        waypoints = list(waypoints)
        if not waypoints:
            raise InvalidInputError("need at least one waypoint")
        arr = np.stack([w.vector if isinstance(w, AttributedWaypoint) else np.asarray(w, dtype=float)
                        for w in waypoints])
    if arr.shape[0] == 0:
        raise InvalidInputError("need at least one waypoint")
    return arr


def interpolation_weights(n: int, samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT):
    """Bracketing indices and weights of the dense polyline through ``n`` waypoints.

    Dense point ``j`` equals ``w_lo[j] * W[lo[j]] + w_hi[j] * W[lo[j] + 1]``
    (for ``n == 1`` the single point is ``W[0]``).
    """
    if n < 1:
        raise InvalidInputError("need at least one waypoint")
    if samples_per_segment < 1:
        raise InvalidInputError("samples_per_segment must be positive")
    s = int(samples_per_segment)
    if n == 1:
        return np.zeros(1, dtype=int), np.ones(1), np.zeros(1)
    m = (n - 1) * s + 1
    j = np.arange(m)
    seg = np.minimum(j // s, n - 2)
    local = j - seg * s
    return seg, (s - local) / s, local / s


def interpolation_matrix(n: int, samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT) -> np.ndarray:
    """Linear map from ``n`` waypoints to the dense polyline, shape ``(m, n)``."""
    seg, w_lo, w_hi = interpolation_weights(n, samples_per_segment)
    M = np.zeros((seg.shape[0], n))
    rows = np.arange(seg.shape[0])
    M[rows, seg] += w_lo
    if n > 1:
        M[rows, seg + 1] += w_hi
    return M


def interpolate_array(waypoints: np.ndarray, samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT) -> np.ndarray:
    W = np.asarray(waypoints, dtype=float)
    seg, w_lo, w_hi = interpolation_weights(W.shape[0], samples_per_segment)
    if W.shape[0] == 1:
        return W.copy()
    return w_lo[:, None] * W[seg] + w_hi[:, None] * W[seg + 1]


def interpolate_waypoints(waypoints, samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT) -> AttributedTrajectory:
    """Dense polyline through the waypoints, every channel interpolated linearly.

    Returns ``(n - 1) * samples_per_segment + 1`` points whose first and last
    entries equal the first and last waypoints exactly.
    """
    W = _as_waypoint_array(waypoints)
    return AttributedTrajectory(interpolate_array(W, samples_per_segment))


def waypoints_from_array(array: Iterable) -> list[AttributedWaypoint]:
    return [AttributedWaypoint.from_vector(v) for v in np.asarray(array, dtype=float)]


def trajectory_from_waypoints(waypoints: Sequence[AttributedWaypoint]) -> AttributedTrajectory:
    return AttributedTrajectory(_as_waypoint_array(waypoints))
