"""Eye-in-hand depth rendering by analytic ray casting against the ground plane, spheres and boxes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

NO_HIT = np.inf

# camera axes in world coordinates: x along world +x, y along world -y, looking down -z
CAMERA_ROTATION = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
CAMERA_ROTATION.setflags(write=False)


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Z-depth in meters along the camera's +z axis; ``inf`` where no surface was hit."""

    width: int
    height: int
    depths: np.ndarray
    intrinsics: tuple
    camera_pose: np.ndarray  # 4x4 camera-to-world transform

    def __post_init__(self):
        d = np.array(self.depths, dtype=float).reshape(self.height, self.width)
        d.setflags(write=False)
        object.__setattr__(self, "depths", d)
        if np.any(d < 0):
            raise ValueError("depths must be nonnegative")

    @property
    def center(self) -> tuple:
        _, _, cx, cy = self.intrinsics
        return cx, cy

    def back_project(self, u, v, depth) -> np.ndarray:
        """World point seen at pixel column ``u``, row ``v`` with z-depth ``depth``."""
        fx, fy, cx, cy = self.intrinsics
        cam = np.array([(u - cx) * depth / fx, (v - cy) * depth / fy, depth])
        return self.camera_pose[:3, :3] @ cam + self.camera_pose[:3, 3]


def camera_pose(position) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = CAMERA_ROTATION
    T[:3, 3] = position
    return T


def pixel_rays(width, height, intrinsics) -> np.ndarray:
    """Camera-frame ray directions with unit z component, shape ``(H, W, 3)``."""
    fx, fy, cx, cy = intrinsics
    u = np.arange(width, dtype=float)
    v = np.arange(height, dtype=float)
    uu, vv = np.meshgrid(u, v)
    return np.stack([(uu - cx) / fx, (vv - cy) / fy, np.ones_like(uu)], axis=-1)


def _hit_sphere(origin, dirs, center, radius):
    oc = origin - center
    a = np.einsum("ij,ij->i", dirs, dirs)
    b = 2.0 * dirs @ oc
    c = oc @ oc - radius * radius
    disc = b * b - 4 * a * c
    t = np.full(dirs.shape[0], NO_HIT)
    ok = disc >= 0
    sq = np.sqrt(disc[ok])
    t0 = (-b[ok] - sq) / (2 * a[ok])
    t1 = (-b[ok] + sq) / (2 * a[ok])
    t_ok = np.where(t0 > 0, t0, np.where(t1 > 0, t1, NO_HIT))
    t[ok] = t_ok
    return t


def _hit_box(origin, dirs, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo - origin) * inv
        t2 = (hi - origin) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=1)
    hit = (tmax >= tmin) & (tmax > 0)
    return np.where(hit, np.where(tmin > 0, tmin, tmax), NO_HIT)


def render_scene(scene, cam_position, resolution=(64, 64), intrinsics=(100.0, 100.0, 32.0, 32.0)) -> DepthImage:
    width, height = resolution
    origin = np.asarray(cam_position, dtype=float)
    cam_dirs = pixel_rays(width, height, intrinsics).reshape(-1, 3)
    dirs = cam_dirs @ CAMERA_ROTATION.T
    # ray parameter equals z-depth because camera-frame directions have unit z
    depth = np.full(dirs.shape[0], NO_HIT)
    down = dirs[:, 2] < 0
    depth[down] = -origin[2] / dirs[down, 2]
    depth[depth <= 0] = NO_HIT
    for obj in scene.objects:
        center = np.asarray(obj.position)
        half = obj.size / 2.0
        if obj.shape == "sphere":
            t = _hit_sphere(origin, dirs, center, half)
        else:
            t = _hit_box(origin, dirs, center - half, center + half)
        depth = np.minimum(depth, t)
    return DepthImage(width, height, depth.reshape(height, width), tuple(intrinsics), camera_pose(origin))


def render_depth(sim, state, resolution=None, intrinsics=None) -> DepthImage:
    cfg = sim.config
    return render_scene(state.scene, sim.camera_position(state),
                        resolution or cfg.resolution, intrinsics or cfg.intrinsics)


def save_pgm(image: DepthImage, path) -> None:
    """16-bit binary PGM in millimeters; pixels without a hit are written as 65535."""
    mm = np.where(np.isfinite(image.depths), np.rint(image.depths * 1000.0), 65535)
    data = np.clip(mm, 0, 65535).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def load_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    width, height = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(height, width)
