"""Rotation algebra, pose-grid enumeration, and 3D -> 2D projection.

Axis convention: pitch/yaw/roll are rotations about x/y/z. The camera sits on
the +z axis looking toward -z, so z-axis object rotation is an in-plane image
rotation. Dual-axis poses compose about fixed world axes (extrinsic), first
listed axis applied first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .clipgen import Paperclip

SINGLE_AXES = ("x", "y", "z")
DUAL_AXES = ("xy", "xz", "yz")
ALL_AXES = SINGLE_AXES + DUAL_AXES


class BehindCamera(ValueError):
    """Raised by perspective projection when a point is not in front of the camera."""


@dataclass(frozen=True)
class PoseSpec:
    axes: str                       # "x".."z" or "xy"/"xz"/"yz"
    angles_deg: tuple[float, ...]   # one angle per axis letter

    def __post_init__(self):
        if self.axes not in ALL_AXES:
            raise ValueError(f"unknown axes {self.axes!r}")
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))
        if len(self.angles_deg) != len(self.axes):
            raise ValueError(f"axes {self.axes!r} needs {len(self.axes)} angles, got {self.angles_deg}")

    def to_json(self) -> dict:
        return {"axes": self.axes, "angles": list(self.angles_deg)}

    @classmethod
    def from_json(cls, d: dict) -> "PoseSpec":
        return cls(d["axes"], tuple(d["angles"]))


@dataclass(frozen=True)
class Camera:
    mode: str = "orthographic"      # "orthographic" | "perspective"
    distance: float = 3.0           # camera position on +z (perspective only)
    scale: float = 2.5              # object units spanned by the image height
    image_size: int = 224

    def __post_init__(self):
        if self.mode not in ("orthographic", "perspective"):
            raise ValueError(f"unknown camera mode {self.mode!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.mode == "perspective" and self.distance <= 1:
            raise ValueError("perspective distance must exceed 1 (object max norm is 1)")

    def to_json(self) -> dict:
        return {"mode": self.mode, "distance": self.distance,
                "scale": self.scale, "image_size": self.image_size}

    @classmethod
    def from_json(cls, d: dict) -> "Camera":
        return cls(d["mode"], d["distance"], d["scale"], d["image_size"])


def rotation_matrix(axis: str, deg: float) -> np.ndarray:
    """3x3 right-handed rotation about a world axis, angle in degrees."""
    t = np.radians(deg)
    c, s = np.cos(t), np.sin(t)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)
    raise ValueError(f"unknown axis {axis!r}")


def pose_matrix(pose: PoseSpec) -> np.ndarray:
    """Composite rotation for a pose; first listed axis applied first (extrinsic)."""
    m = np.eye(3)
    for axis, ang in zip(pose.axes, pose.angles_deg):
        m = rotation_matrix(axis, ang) @ m
    return m


def apply_pose(p, pose: PoseSpec) -> np.ndarray:
    """Rigidly rotate a Paperclip or an (N,3) point array about its centroid."""
    pts = p.vertices if isinstance(p, Paperclip) else np.asarray(p, dtype=np.float64)
    c = pts.mean(axis=0)
    return (pts - c) @ pose_matrix(pose).T + c


def pose_grid(axes_set: Iterable[str], single_stride: float = 1.0,
              dual_stride: float = 10.0) -> list[PoseSpec]:
    """Enumerate the evaluation grid: 360/stride poses per single axis,
    (360/stride)^2 per dual pair, in axes order, first angle outermost."""
    if 360 % single_stride or 360 % dual_stride:
        raise ValueError("strides must divide 360")
    poses = []
    for axes in axes_set:
        if axes in SINGLE_AXES:
            for a in np.arange(0.0, 360.0, single_stride):
                poses.append(PoseSpec(axes, (float(a),)))
        elif axes in DUAL_AXES:
            ticks = np.arange(0.0, 360.0, dual_stride)
            for a1 in ticks:
                for a2 in ticks:
                    poses.append(PoseSpec(axes, (float(a1), float(a2))))
        else:
            raise ValueError(f"unknown axes {axes!r}")
    return poses


def full_protocol_grid() -> list[PoseSpec]:
    """x/y/z at 1 deg plus xy/xz/yz at 10 deg: 360*3 + 36*36*3 = 4968 poses."""
    return pose_grid(ALL_AXES)


def project_plane(points: np.ndarray, cam: Camera) -> np.ndarray:
    """Project (...,3) points to image-plane coordinates in object units.

    Orthographic drops z. Perspective divides by depth along -z, normalized so
    the z=0 plane projects identically to the orthographic camera.
    """
    pts = np.asarray(points, dtype=np.float64)
    if cam.mode == "orthographic":
        return pts[..., :2].copy()
    depth = cam.distance - pts[..., 2]
    if np.any(depth <= 1e-9):
        raise BehindCamera("point at or behind the camera plane")
    return pts[..., :2] * (cam.distance / depth)[..., None]


def to_pixels(plane: np.ndarray, cam: Camera) -> np.ndarray:
    """Map plane coordinates to pixel coordinates (origin top-left, no y flip)."""
    f = cam.image_size / cam.scale
    return cam.image_size / 2.0 + np.asarray(plane, dtype=np.float64) * f


def project(points: np.ndarray, cam: Camera) -> np.ndarray:
    """(N,3) points -> (N,2) pixel coordinates under cam."""
    return to_pixels(project_plane(points, cam), cam)


def view_points(clip, pose: PoseSpec, cam: Camera | None = None) -> np.ndarray:
    """Plane-coordinate 2D view of a clip at a pose (the oracles' native input)."""
    cam = cam or Camera()
    return project_plane(apply_pose(clip, pose), cam)


def parse_view_spec(spec: str) -> list[PoseSpec]:
    """Training-view grammar:

    "y:0,30,60"            explicit angles
    "y:uniform:12"         12 equidistant views starting at 0 (optional :OFFSET)
    "y:range:-30:30:7"     7 views uniform on [-30, 30] inclusive

    Multiple groups may be joined with ';'.
    """
    poses = []
    for group in spec.split(";"):
        group = group.strip()
        if not group:
            continue
        head, _, rest = group.partition(":")
        axis = head.strip()
        if axis not in SINGLE_AXES:
            raise ValueError(f"train-view spec supports single axes only, got {axis!r}")
        parts = rest.split(":")
        if parts[0] == "uniform":
            k = int(parts[1])
            offset = float(parts[2]) if len(parts) > 2 else 0.0
            angles = (offset + np.arange(k) * (360.0 / k)) % 360.0
        elif parts[0] == "range":
            lo, hi, k = float(parts[1]), float(parts[2]), int(parts[3])
            angles = np.linspace(lo, hi, k) % 360.0
        else:
            angles = np.array([float(a) for a in rest.split(",")]) % 360.0
        poses.extend(PoseSpec(axis, (float(a),)) for a in angles)
    if not poses:
        raise ValueError(f"empty view spec {spec!r}")
    return poses
