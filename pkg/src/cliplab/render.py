"""Rasterization into the three input representations, mesh shading, and
dataset emission with JSON manifests.

Representations: "wireframe" (7 anti-aliased segments), "coordimage" (one
anti-aliased disc per vertex), "coordarray" (two concatenated 1D histograms of
normalized x and y vertex positions, 1/8 weight per vertex), plus "mesh"
(z-buffered flat-shaded triangles) for ingested 3D models.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .clipgen import N_VERTICES, Paperclip, class_rng
from .scene import Camera, PoseSpec, apply_pose, project, project_plane, to_pixels

LINE_WIDTH_PX = 2.0
DISC_RADIUS_PX = 2.0
DEFAULT_COORD_BINS = 64
VERTEX_WEIGHT = 1.0 / N_VERTICES

DATASET_MANIFEST = "dataset_manifest.json"
REPRESENTATIONS = ("wireframe", "coordimage", "coordarray", "mesh")


class SizeMismatch(ValueError):
    """Raised when compositing images of different shapes."""


class EmptyMesh(ValueError):
    """Raised when a mesh has no usable triangles."""


@dataclass
class RasterImage:
    pixels: np.ndarray  # (H, W) or (H, W, 3) uint8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim not in (2, 3):
            raise ValueError("pixels must be (H,W) or (H,W,3)")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]

    @classmethod
    def black(cls, size: int, channels: int = 1) -> "RasterImage":
        shape = (size, size) if channels == 1 else (size, size, channels)
        return cls(np.zeros(shape, dtype=np.uint8))

    def save_png(self, path: str):
        Image.fromarray(self.pixels, mode="L" if self.channels == 1 else "RGB").save(path)

    @classmethod
    def load_png(cls, path: str) -> "RasterImage":
        img = Image.open(path)
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return cls(np.asarray(img))


@dataclass
class Mesh:
    vertices: np.ndarray   # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int indices

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")


# Pixel centers sit at integer+0.5; coverage is the clamped signed distance to
# the stroked primitive, which approximates area coverage for 1px falloff.

def _pixel_grid(x0, x1, y0, y1):
    ys, xs = np.mgrid[y0:y1, x0:x1]
    return xs + 0.5, ys + 0.5


def _stamp_coverage(canvas: np.ndarray, cov: np.ndarray, x0, x1, y0, y1):
    region = canvas[y0:y1, x0:x1]
    np.maximum(region, cov, out=region)


def _segment_coverage(canvas: np.ndarray, p, q, halfwidth: float):
    size_y, size_x = canvas.shape
    pad = halfwidth + 1.5
    x0 = max(int(np.floor(min(p[0], q[0]) - pad)), 0)
    x1 = min(int(np.ceil(max(p[0], q[0]) + pad)) + 1, size_x)
    y0 = max(int(np.floor(min(p[1], q[1]) - pad)), 0)
    y1 = min(int(np.ceil(max(p[1], q[1]) + pad)) + 1, size_y)
    if x0 >= x1 or y0 >= y1:
        return
    cx, cy = _pixel_grid(x0, x1, y0, y1)
    dx, dy = q[0] - p[0], q[1] - p[1]
    l2 = dx * dx + dy * dy
    if l2 < 1e-18:
        px, py = cx - p[0], cy - p[1]
        dist = np.hypot(px, py)
    else:
        t = np.clip(((cx - p[0]) * dx + (cy - p[1]) * dy) / l2, 0.0, 1.0)
        dist = np.hypot(cx - (p[0] + t * dx), cy - (p[1] + t * dy))
    cov = np.clip(halfwidth + 0.5 - dist, 0.0, 1.0)
    _stamp_coverage(canvas, cov, x0, x1, y0, y1)


def render_wireframe(points2d: np.ndarray, cam: Camera) -> RasterImage:
    """White-on-black anti-aliased polyline through the 8 projected vertices."""
    pts = np.asarray(points2d, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite projected points")
    canvas = np.zeros((cam.image_size, cam.image_size))
    half = LINE_WIDTH_PX / 2.0
    for i in range(len(pts) - 1):
        _segment_coverage(canvas, pts[i], pts[i + 1], half)
    return RasterImage(np.rint(canvas * 255).astype(np.uint8))


def render_coord_image(points2d: np.ndarray, cam: Camera) -> RasterImage:
    """One anti-aliased disc per projected vertex, white on black."""
    pts = np.asarray(points2d, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite projected points")
    canvas = np.zeros((cam.image_size, cam.image_size))
    for p in pts:
        _segment_coverage(canvas, p, p, DISC_RADIUS_PX)
    return RasterImage(np.rint(canvas * 255).astype(np.uint8))


def coord_array(points2d: np.ndarray, cam: Camera, bins: int = DEFAULT_COORD_BINS) -> np.ndarray:
    """Two concatenated histograms (x half then y half) of length `bins` each.

    Every vertex whose projection lies inside the frame adds 1/8 to the bin
    floor(normalized_coord * bins), clamped to the last bin at the far edge;
    out-of-frame vertices contribute nothing.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    pts = np.asarray(points2d, dtype=np.float64)
    n = pts / cam.image_size
    in_frame = np.all((n >= 0.0) & (n <= 1.0), axis=1)
    out = np.zeros(2 * bins)
    idx = np.minimum(np.floor(n[in_frame] * bins).astype(np.int64), bins - 1)
    np.add.at(out[:bins], idx[:, 0], VERTEX_WEIGHT)
    np.add.at(out[bins:], idx[:, 1], VERTEX_WEIGHT)
    return out


def coord_array_from_plane(plane_pts: np.ndarray, cam: Camera,
                           bins: int = DEFAULT_COORD_BINS) -> np.ndarray:
    return coord_array(to_pixels(plane_pts, cam), cam, bins)


DEFAULT_LIGHT = np.array([0.3, -0.5, -1.0]) / np.linalg.norm([0.3, -0.5, -1.0])
AMBIENT = 0.15


def render_mesh_flat(mesh: Mesh, pose: PoseSpec, cam: Camera,
                     light_dir=DEFAULT_LIGHT) -> RasterImage:
    """Z-buffered flat shading: uniform gray albedo, one directional light,
    two-sided triangles, black background."""
    if mesh.triangles.size == 0:
        raise EmptyMesh("mesh has no triangles")
    light = np.asarray(light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    verts = apply_pose(mesh.vertices, pose)
    pix = project(verts, cam)
    depth = verts[:, 2]  # camera looks down -z: larger z is closer
    size = cam.image_size
    canvas = np.zeros((size, size))
    zbuf = np.full((size, size), -np.inf)
    for tri in mesh.triangles:
        p0, p1, p2 = pix[tri]
        z0, z1, z2 = depth[tri]
        x0 = max(int(np.floor(min(p0[0], p1[0], p2[0]))), 0)
        x1 = min(int(np.ceil(max(p0[0], p1[0], p2[0]))) + 1, size)
        y0 = max(int(np.floor(min(p0[1], p1[1], p2[1]))), 0)
        y1 = min(int(np.ceil(max(p0[1], p1[1], p2[1]))) + 1, size)
        if x0 >= x1 or y0 >= y1:
            continue
        area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
        if abs(area) < 1e-12:
            continue
        n = np.cross(verts[tri][1] - verts[tri][0], verts[tri][2] - verts[tri][0])
        nn = np.linalg.norm(n)
        if nn < 1e-15:
            continue
        n = n / nn
        if n[2] < 0:  # flip toward the camera (two-sided shading)
            n = -n
        shade = AMBIENT + (1.0 - AMBIENT) * max(0.0, float(n @ (-light)))
        cx, cy = _pixel_grid(x0, x1, y0, y1)
        w0 = ((p1[0] - cx) * (p2[1] - cy) - (p1[1] - cy) * (p2[0] - cx)) / area
        w1 = ((p2[0] - cx) * (p0[1] - cy) - (p2[1] - cy) * (p0[0] - cx)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        z = w0 * z0 + w1 * z1 + w2 * z2
        region_z = zbuf[y0:y1, x0:x1]
        win = inside & (z > region_z)
        region_z[win] = z[win]
        canvas[y0:y1, x0:x1][win] = shade
    return RasterImage(np.rint(np.clip(canvas, 0, 1) * 255).astype(np.uint8))


def composite_background(img: RasterImage, bg: RasterImage) -> RasterImage:
    """Background shows through exactly where the foreground is black."""
    fg = img.pixels
    bgp = bg.pixels
    if fg.shape[:2] != bgp.shape[:2]:
        raise SizeMismatch(f"foreground {fg.shape} vs background {bgp.shape}")
    mask = fg == 0 if fg.ndim == 2 else np.all(fg == 0, axis=2)
    if fg.ndim == 2 and bgp.ndim == 3:
        fg = np.repeat(fg[:, :, None], 3, axis=2)
    elif fg.ndim == 3 and bgp.ndim == 2:
        bgp = np.repeat(bgp[:, :, None], 3, axis=2)
    out = fg.copy()
    out[mask] = bgp[mask]
    return RasterImage(out)


# Minimal OBJ ingestion: v/f lines, fan triangulation, 1-based (or negative)
# indices; zero-area faces dropped on load.

def load_obj(path: str) -> Mesh:
    verts, tris = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
    v = np.array(verts, dtype=np.float64).reshape(-1, 3)
    t = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if len(t):
        ab = v[t[:, 1]] - v[t[:, 0]]
        ac = v[t[:, 2]] - v[t[:, 0]]
        area2 = np.linalg.norm(np.cross(ab, ac), axis=1)
        t = t[area2 > 1e-12]
    return Mesh(v, t)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform SO(3) sample via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, [0, 1]] = q[:, [1, 0]]
    return q


def ingest_mesh(path: str, class_id: int, seed: int) -> Mesh:
    """Load an OBJ, center and scale it to max vertex norm 1, and apply a
    canonical-pose-breaking random rotation from the class RNG stream."""
    mesh = load_obj(path)
    if mesh.triangles.size == 0:
        raise EmptyMesh(f"{path}: no triangles")
    v = mesh.vertices - mesh.vertices.mean(axis=0)
    r = np.max(np.linalg.norm(v, axis=1))
    if r < 1e-12:
        raise EmptyMesh(f"{path}: degenerate vertex set")
    v = (v / r) @ random_rotation(class_rng(seed, class_id)).T
    return Mesh(v, mesh.triangles)


# Dataset emission ----------------------------------------------------------

def _angles_token(angles) -> str:
    return "_".join(f"{a:g}".replace(".", "p").replace("-", "m") for a in angles)


def _pose_key(pose: PoseSpec) -> tuple:
    return (pose.axes, pose.angles_deg)


def emit_dataset(objects, poses: list[PoseSpec], representation: str, out_dir: str,
                 cam: Camera | None = None, seed: int = 0,
                 coord_bins: int = DEFAULT_COORD_BINS,
                 train_poses: list[PoseSpec] | None = None,
                 backgrounds: list[RasterImage] | None = None,
                 generator_config: dict | None = None) -> dict:
    """Render one record per (object, pose) and write the manifest last.

    `objects` are Paperclips (wireframe/coordimage/coordarray) or Meshes with
    class ids attached as (class_id, Mesh) pairs (representation "mesh").
    The manifest is written atomically so an interrupted run leaves none.
    Returns the manifest dict.
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    cam = cam or Camera()
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "images")
    if representation != "coordarray":
        os.makedirs(img_dir, exist_ok=True)
    train_keys = {_pose_key(p) for p in (train_poses or [])}
    seen_paths = set()
    records = []
    for obj in objects:
        if representation == "mesh":
            class_id, mesh = obj
        else:
            class_id, mesh = obj.class_id, None
        for pidx, pose in enumerate(poses):
            rec = {"class_id": class_id, "axes": pose.axes,
                   "angles": list(pose.angles_deg),
                   "split": "train" if _pose_key(pose) in train_keys else "eval"}
            if representation == "coordarray":
                plane = project_plane(apply_pose(obj, pose), cam)
                rec["values"] = coord_array_from_plane(plane, cam, coord_bins).tolist()
            else:
                if representation == "mesh":
                    img = render_mesh_flat(mesh, pose, cam)
                else:
                    pix = project(apply_pose(obj, pose), cam)
                    if representation == "wireframe":
                        img = render_wireframe(pix, cam)
                    else:
                        img = render_coord_image(pix, cam)
                if backgrounds:
                    pick = class_rng(seed ^ 0x5AFE, class_id * 1000003 + pidx)
                    img = composite_background(img, backgrounds[pick.integers(len(backgrounds))])
                name = f"c{class_id:05d}_{pose.axes}_{_angles_token(pose.angles_deg)}.png"
                if name in seen_paths:
                    raise ValueError(f"duplicate record path {name}")
                seen_paths.add(name)
                img.save_png(os.path.join(img_dir, name))
                rec["path"] = os.path.join("images", name)
            records.append(rec)
    n_objects = len(records) // max(len(poses), 1)
    manifest = {
        "format_version": 1,
        "seed": seed,
        "num_classes": n_objects,
        "representation": representation,
        "coord_bins": coord_bins,
        "camera": cam.to_json(),
        "pose_grid": {"num_poses": len(poses),
                      "axes": sorted({p.axes for p in poses})},
        "generator": generator_config,
        "records": records,
    }
    path = os.path.join(out_dir, DATASET_MANIFEST)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, separators=(",", ":"))
    os.replace(tmp, path)
    return manifest


def read_manifest(path: str) -> dict:
    if os.path.isdir(path):
        path = os.path.join(path, DATASET_MANIFEST)
    with open(path) as fh:
        manifest = json.load(fh)
    for key in ("format_version", "representation", "camera", "records"):
        if key not in manifest:
            raise ValueError(f"manifest missing field {key!r}")
    return manifest
