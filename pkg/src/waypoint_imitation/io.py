"""JSON-lines serialization of trajectories, scenes, robot logs and samples.

Every line is one JSON object carrying a ``"type"`` tag. Floats are written
with Python's shortest round-trip representation, so a save/load cycle
reproduces every float bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import (
    AttributedTrajectory,
    AttributedWaypoint,
    Bin,
    DemonstrationClip,
    RobotLog,
    Sample,
    Scene,
    SceneObject,
    Workspace,
)
from .errors import ParseError


def _floats(a):
    return np.asarray(a, dtype=float).tolist()


def trajectory_to_dict(traj: AttributedTrajectory) -> dict:
    d = {"type": "trajectory", "points": _floats(traj.points)}
    if traj.timestamps is not None:
        d["timestamps"] = _floats(traj.timestamps)
    return d


def trajectory_from_dict(d: dict) -> AttributedTrajectory:
    return AttributedTrajectory(np.array(d["points"], dtype=float).reshape(len(d["points"]), -1),
                                d.get("timestamps"))


def waypoints_to_dict(waypoints) -> dict:
    return {"type": "waypoints", "waypoints": [
        {"position": _floats(w.position), "attributes": _floats(w.attributes)} for w in waypoints]}


def waypoints_from_dict(d: dict) -> list[AttributedWaypoint]:
    return [AttributedWaypoint(w["position"], w["attributes"]) for w in d["waypoints"]]


def scene_to_dict(scene: Scene) -> dict:
    return {
        "type": "scene",
        "objects": [{"id": o.id, "shape": o.shape, "size": o.size, "position": list(o.position)}
                    for o in scene.objects],
        "bins": [{"id": b.id, "center": list(b.center), "extent": list(b.extent)} for b in scene.bins],
        "arm_base": list(scene.arm_base),
        "workspace": {"lo": list(scene.workspace.lo), "hi": list(scene.workspace.hi)},
    }


def scene_from_dict(d: dict) -> Scene:
    ws = d.get("workspace")
    return Scene(
        objects=tuple(SceneObject(o["id"], o["shape"], o["size"], tuple(o["position"])) for o in d["objects"]),
        bins=tuple(Bin(b["id"], tuple(b["center"]), tuple(b["extent"])) for b in d["bins"]),
        arm_base=tuple(d.get("arm_base", (0.0, 0.0, 0.2))),
        workspace=Workspace(tuple(ws["lo"]), tuple(ws["hi"])) if ws else Workspace(),
    )


def robot_log_to_dict(log: RobotLog) -> dict:
    return {
        "type": "robot_log",
        "joint_angles": _floats(log.joint_angles),
        "gripper_gap": _floats(log.gripper_gap),
        "ee_position": _floats(log.ee_position),
        "delta_ee": _floats(log.delta_ee),
        "gripper_close": [bool(c) for c in log.gripper_close],
    }


def robot_log_from_dict(d: dict) -> RobotLog:
    return RobotLog(
        np.array(d["joint_angles"], dtype=float),
        np.array(d["gripper_gap"], dtype=float),
        np.array(d["ee_position"], dtype=float),
        np.array(d["delta_ee"], dtype=float),
        np.array(d["gripper_close"], dtype=bool),
    )


def sample_to_dict(sample: Sample) -> dict:
    return {
        "type": "sample",
        "task_id": sample.task_id,
        "origin": sample.origin,
        "demo": {"frames": _floats(sample.demo.frames),
                 "source_trajectory": trajectory_to_dict(sample.demo.source_trajectory),
                 "origin": sample.demo.origin},
        "instance_descriptor": _floats(sample.instance_descriptor),
        "target": trajectory_to_dict(sample.target),
    }


def sample_from_dict(d: dict) -> Sample:
    demo = d["demo"]
    clip = DemonstrationClip(np.array(demo["frames"], dtype=float),
                             trajectory_from_dict(demo["source_trajectory"]), demo["origin"])
    return Sample(clip, np.array(d["instance_descriptor"], dtype=float),
                  trajectory_from_dict(d["target"]), d["origin"], d.get("task_id"))


_ENCODERS = {
    AttributedTrajectory: trajectory_to_dict,
    Scene: scene_to_dict,
    RobotLog: robot_log_to_dict,
    Sample: sample_to_dict,
}
_DECODERS = {
    "trajectory": trajectory_from_dict,
    "scene": scene_from_dict,
    "robot_log": robot_log_from_dict,
    "sample": sample_from_dict,
    "waypoints": waypoints_from_dict,
}


def to_record(obj) -> dict:
    try:
        return _ENCODERS[type(obj)](obj)
    except KeyError:
        raise TypeError(f"cannot serialize {type(obj).__name__}") from None


def from_record(d: dict):
    kind = d.get("type")
    if kind not in _DECODERS:
        raise ValueError(f"unknown record type {kind!r}")
    return _DECODERS[kind](d)


def dumps(obj) -> str:
    return json.dumps(to_record(obj), separators=(",", ":"), allow_nan=False)


def save_jsonl(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")


def load_jsonl(path, expect=None) -> list:
    """Read a JSONL file; ``expect`` optionally restricts the record type."""
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if expect is not None and d.get("type") != expect:
                    raise ValueError(f"expected a {expect!r} record, got {d.get('type')!r}")
                out.append(from_record(d))
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise ParseError(f"malformed record: {exc}", line=lineno, path=str(path)) from exc
    return out


def save_dataset(samples, path) -> None:
    save_jsonl(samples, path)


def load_dataset(path) -> list[Sample]:
    return load_jsonl(path, expect="sample")


def save_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_record(obj), indent=2) + "\n", encoding="utf-8")


def load_json(path):
    path = Path(path)
    try:
        return from_record(json.loads(path.read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed record: {exc}", path=str(path)) from exc
