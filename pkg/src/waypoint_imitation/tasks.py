"""Task definitions, the pick-and-place task family and random scene sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Bin, Scene, SceneObject, Workspace
from .errors import InvalidInputError


@dataclass(frozen=True)
class PickPlaceTask:
    object_id: int
    bin_id: int

    @property
    def task_id(self) -> str:
        return f"pick_place:o{self.object_id}-b{self.bin_id}"


@dataclass(frozen=True)
class ReachTask:
    points: tuple

    @property
    def task_id(self) -> str:
        return "reach:" + ";".join(",".join(f"{v:.3f}" for v in p) for p in self.points)


def parse_task_id(task_id: str):
    kind, _, rest = task_id.partition(":")
    if kind == "pick_place":
        o, b = rest.split("-")
        return PickPlaceTask(int(o[1:]), int(b[1:]))
    if kind == "reach":
        return ReachTask(tuple(tuple(float(v) for v in p.split(",")) for p in rest.split(";")))
    raise InvalidInputError(f"unknown task id {task_id!r}")


def task_success(task, state, sim=None, tol=0.01) -> bool:
    """Pick-place succeeds when the released object's center lies in the bin;
    reach succeeds when the end effector ends within ``tol`` of the last point."""
    if isinstance(task, PickPlaceTask):
        if state.attached_object == task.object_id:
            return False
        obj = state.scene.object_by_id(task.object_id)
        return state.scene.bin_by_id(task.bin_id).contains(obj.position)
    if sim is None:
        raise InvalidInputError("reach success needs the simulator")
    return bool(np.linalg.norm(sim.ee_position(state) - np.asarray(task.points[-1])) <= tol)


@dataclass(frozen=True)
class TaskFamily:
    """Objects ``0..n_objects-1`` and bins ``0..n_bins-1`` present in every scene.

    Each (object, bin) pair is one task; the scene layout is random per instance.
    """

    n_objects: int = 4
    n_bins: int = 4
    size_range: tuple = (0.036, 0.05)
    bin_extent: tuple = (0.12, 0.12, 0.1)
    region_lo: tuple = (0.25, -0.25)
    region_hi: tuple = (0.55, 0.25)
    object_separation: float = 0.1
    bin_separation: float = 0.14
    object_bin_separation: float = 0.1
    arm_base: tuple = (0.0, 0.0, 0.2)
    workspace: Workspace = field(default_factory=Workspace)

    def tasks(self) -> list[PickPlaceTask]:
        return [PickPlaceTask(o, b) for o in range(self.n_objects) for b in range(self.n_bins)]

    def split(self, n_heldout: int = 2, seed: int = 0):
        """Deterministic train/held-out split; every held-out object and bin also appears in training."""
        tasks = self.tasks()
        rng = np.random.default_rng(seed)
        for _ in range(1000):
            order = rng.permutation(len(tasks))
            heldout = [tasks[i] for i in sorted(order[:n_heldout])]
            train = [tasks[i] for i in sorted(order[n_heldout:])]
            objs = {t.object_id for t in train}
            bins = {t.bin_id for t in train}
            if all(t.object_id in objs and t.bin_id in bins for t in heldout):
                return train, heldout
        raise InvalidInputError("could not split the task family")

    def sample_scene(self, rng: np.random.Generator, max_tries: int = 10000) -> Scene:
        lo = np.asarray(self.region_lo)
        hi = np.asarray(self.region_hi)
        bins: list = []
        while len(bins) < self.n_bins:
            for _ in range(max_tries):
                c = rng.uniform(lo, hi)
                if all(np.linalg.norm(c - b) >= self.bin_separation for b in bins):
                    bins.append(c)
                    break
            else:
                raise InvalidInputError("could not place bins")
        objects: list = []
        while len(objects) < self.n_objects:
            for _ in range(max_tries):
                c = rng.uniform(lo, hi)
                if (all(np.linalg.norm(c - o) >= self.object_separation for o in objects)
                        and all(np.linalg.norm(c - b) >= self.object_bin_separation for b in bins)):
                    objects.append(c)
                    break
            else:
                raise InvalidInputError("could not place objects")
        shapes = rng.integers(0, 2, size=self.n_objects)
        sizes = rng.uniform(*self.size_range, size=self.n_objects)
        scene_objects = tuple(
            SceneObject(i, ("sphere", "box")[int(shapes[i])], float(sizes[i]),
                        (float(objects[i][0]), float(objects[i][1]), float(sizes[i]) / 2))
            for i in range(self.n_objects))
        scene_bins = tuple(
            Bin(j, (float(bins[j][0]), float(bins[j][1]), self.bin_extent[2] / 2), self.bin_extent)
            for j in range(self.n_bins))
        return Scene(scene_objects, scene_bins, self.arm_base, self.workspace)
