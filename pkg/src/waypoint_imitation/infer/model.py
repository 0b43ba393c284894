"""Two-headed waypoint predictor: a tanh MLP trunk over the flattened demo and
instance descriptor, with one affine head for task samples and one for
synthesized samples. All parameters live in one flat vector."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..core import (
    DEMO_FRAMES,
    DESCRIPTOR_DIM,
    AttributedWaypoint,
    DemonstrationClip,
    Workspace,
)
from ..errors import InvalidInputError
from ..sdtw import HEAD_OFFSETS, HEAD_SIZES, TOTAL_WAYPOINTS

TASK_HEAD = 0
SYNTH_HEAD = 1


@dataclass(frozen=True)
class Architecture:
    descriptor_dim: int = DESCRIPTOR_DIM
    k: int = 1
    hidden: tuple = (256, 256)
    frames: int = DEMO_FRAMES

    @property
    def point_dim(self) -> int:
        return 3 + self.k

    @property
    def frame_dim(self) -> int:
        return self.descriptor_dim + self.point_dim

    @property
    def input_dim(self) -> int:
        return self.frames * self.frame_dim + self.descriptor_dim

    @property
    def output_dim(self) -> int:
        return TOTAL_WAYPOINTS * self.point_dim

    def shapes(self) -> list[tuple[str, tuple]]:
        dims = (self.input_dim,) + tuple(self.hidden)
        out = []
        for i in range(len(self.hidden)):
            out.append((f"W{i}", (dims[i], dims[i + 1])))
            out.append((f"b{i}", (dims[i + 1],)))
        for name in ("task", "synth"):
            out.append((f"W_{name}", (dims[-1], self.output_dim)))
            out.append((f"b_{name}", (self.output_dim,)))
        return out

    def to_json(self) -> str:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Architecture":
        d = json.loads(text)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


class PredictorModel:
    def __init__(self, arch: Architecture = Architecture(), params=None, seed: int = 0,
                 input_shift=None, input_scale=None):
        self.arch = arch
        # fixed input standardization; identity until set from data
        self.input_shift = np.zeros(arch.input_dim) if input_shift is None else np.array(input_shift, dtype=float)
        self.input_scale = np.ones(arch.input_dim) if input_scale is None else np.array(input_scale, dtype=float)
        self._layout = []
        offset = 0
        for name, shape in arch.shapes():
            size = int(np.prod(shape))
            self._layout.append((name, shape, offset, size))
            offset += size
        self.n_params = offset
        if params is None:
            params = self._init_params(seed)
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise InvalidInputError(f"expected {self.n_params} parameters, got {params.shape}")
        self.params = params.copy()

    def _init_params(self, seed):
        rng = np.random.default_rng(seed)
        p = np.zeros(self.n_params)
        for name, shape, offset, size in self._layout:
            if name.startswith("W"):
                scale = np.sqrt(1.0 / shape[0])
                p[offset:offset + size] = rng.normal(0.0, scale, size)
        return p

    def view(self, params=None) -> dict:
        p = self.params if params is None else params
        return {name: p[offset:offset + size].reshape(shape) for name, shape, offset, size in self._layout}

    def offsets(self, name) -> slice:
        for n, _, offset, size in self._layout:
            if n == name:
                return slice(offset, offset + size)
        raise KeyError(name)

    def copy(self) -> "PredictorModel":
        return PredictorModel(self.arch, self.params, input_shift=self.input_shift, input_scale=self.input_scale)

    def set_normalization(self, X, min_std: float = 1e-3) -> None:
        """Standardize inputs with the per-feature mean and std of ``X``."""
        X = np.asarray(X, dtype=float)
        self.input_shift = X.mean(axis=0)
        self.input_scale = 1.0 / np.maximum(X.std(axis=0), min_std)

    # forward / backward -------------------------------------------------

    def features(self, demo_frames, instance) -> np.ndarray:
        demo_frames = np.asarray(demo_frames, dtype=float)
        instance = np.asarray(instance, dtype=float).reshape(-1)
        if demo_frames.shape != (self.arch.frames, self.arch.frame_dim):
            raise InvalidInputError(f"demo frames must be {(self.arch.frames, self.arch.frame_dim)}, got {demo_frames.shape}")
        if instance.shape != (self.arch.descriptor_dim,):
            raise InvalidInputError(f"instance descriptor must have {self.arch.descriptor_dim} entries")
        return np.concatenate([demo_frames.reshape(-1), instance])

    def forward(self, X, params=None):
        """Trunk activations and both head outputs for a batch ``X`` of shape ``(B, input_dim)``."""
        v = self.view(params)
        X = (np.asarray(X, dtype=float) - self.input_shift) * self.input_scale
        acts = [X]
        h = X
        for i in range(len(self.arch.hidden)):
            h = np.tanh(h @ v[f"W{i}"] + v[f"b{i}"])
            acts.append(h)
        out_task = h @ v["W_task"] + v["b_task"]
        out_synth = h @ v["W_synth"] + v["b_synth"]
        return acts, out_task, out_synth

    def backward(self, acts, heads, d_out, params=None) -> np.ndarray:
        """Gradient of ``sum(d_out * selected_output)`` with respect to the flat parameters.

        ``heads[b]`` selects which head produced row ``b`` of the output.
        """
        v = self.view(params)
        grad = np.zeros(self.n_params)
        g = self.view(grad)
        h = acts[-1]
        dh = np.zeros_like(h)
        for head, name in ((TASK_HEAD, "task"), (SYNTH_HEAD, "synth")):
            rows = heads == head
            if not np.any(rows):
                continue
            g[f"W_{name}"][...] = h[rows].T @ d_out[rows]
            g[f"b_{name}"][...] = d_out[rows].sum(axis=0)
            dh[rows] = d_out[rows] @ v[f"W_{name}"].T
        for i in reversed(range(len(self.arch.hidden))):
            dz = dh * (1.0 - acts[i + 1] ** 2)
            g[f"W{i}"][...] = acts[i].T @ dz
            g[f"b{i}"][...] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ v[f"W{i}"].T
        return grad

    def predict_all(self, demo: DemonstrationClip, instance, head: int = TASK_HEAD) -> np.ndarray:
        """All 15 waypoints from one head, shape ``(15, 3 + k)``."""
        frames = demo.frames if isinstance(demo, DemonstrationClip) else demo
        X = self.features(frames, instance)[None, :]
        _, out_task, out_synth = self.forward(X)
        out = out_task if head == TASK_HEAD else out_synth
        return out[0].reshape(TOTAL_WAYPOINTS, self.arch.point_dim)

    # persistence --------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            np.savez(fh, params=self.params, input_shift=self.input_shift, input_scale=self.input_scale,
                     header=np.array(self.arch.to_json()))

    @classmethod
    def load(cls, path) -> "PredictorModel":
        with np.load(path) as data:
            arch = Architecture.from_json(str(data["header"]))
            return cls(arch, data["params"], input_shift=data["input_shift"], input_scale=data["input_scale"])


def finest_trajectory(all_waypoints) -> np.ndarray:
    """The 5-waypoint output used for execution."""
    W = np.asarray(all_waypoints)
    return W[HEAD_OFFSETS[-1]:HEAD_OFFSETS[-1] + HEAD_SIZES[-1]]


def to_executable(waypoints, workspace: Workspace = Workspace()) -> list[AttributedWaypoint]:
    """Clamp positions to the workspace and attributes to [0, 1]."""
    W = np.array(waypoints, dtype=float)
    W[:, :3] = np.clip(W[:, :3], workspace.lo, workspace.hi)
    W[:, 3:] = np.clip(W[:, 3:], 0.0, 1.0)
    return [AttributedWaypoint.from_vector(w) for w in W]


def predict(model: PredictorModel, demo: DemonstrationClip, instance, origin: str = None) -> np.ndarray:
    """Predict 15 waypoints.

    With ``origin`` given (training), the head is chosen by origin; without it
    (test time) the task head is used.
    """
    head = SYNTH_HEAD if origin == "synthesized" else TASK_HEAD
    return model.predict_all(demo, instance, head)


def predict_for_execution(model: PredictorModel, demo, instance, workspace: Workspace = Workspace()):
    return to_executable(finest_trajectory(model.predict_all(demo, instance, TASK_HEAD)), workspace)
