"""Procedural generation of 8-vertex wire ("paperclip") objects.

Objects are open polylines of exactly 8 vertices, grown by a random walk
(uniform direction, bounded step length) and accepted only if they are free
of sharp bends and of near-contacts between non-adjacent wire segments.
Accepted objects are normalized to centroid 0 and max vertex norm 1.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

N_VERTICES = 8
N_SEGMENTS = N_VERTICES - 1

_MASK64 = (1 << 64) - 1


class GenerationExhausted(RuntimeError):
    """Raised when max_attempts rejection-sampling rounds all fail."""


class DegenerateObject(ValueError):
    """Raised when a vertex set collapses to a single point."""


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def class_rng(seed: int, class_id: int) -> np.random.Generator:
    """Independent RNG stream for one class, stable under any call order."""
    mixed = _splitmix64(_splitmix64(seed & _MASK64) ^ ((class_id & _MASK64) * 0xBF58476D1CE4E5B9 & _MASK64))
    return np.random.default_rng(mixed)


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    step_range: tuple[float, float] = (0.3, 1.0)
    min_segment_angle_deg: float = 30.0
    min_clearance: float = 0.05
    max_attempts: int = 10000

    def __post_init__(self):
        low, high = self.step_range
        if not (0 < low <= high):
            raise ValueError(f"step_range must satisfy 0 < low <= high, got {self.step_range}")
        if not (0 < self.min_segment_angle_deg < 180):
            raise ValueError("min_segment_angle_deg must lie in (0, 180)")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass
class Paperclip:
    vertices: np.ndarray  # (8, 3) float64, centroid 0, max norm 1
    class_id: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        if self.vertices.shape != (N_VERTICES, 3):
            raise ValueError(f"expected {N_VERTICES} 3D vertices, got shape {self.vertices.shape}")


@dataclass(frozen=True)
class Violation:
    kind: str          # "sharp_angle" or "clearance"
    indices: tuple     # vertex index (sharp_angle) or segment pair (clearance)
    value: float       # measured angle in degrees, or distance

    def __str__(self):
        if self.kind == "sharp_angle":
            return f"sharp_angle at vertex {self.indices[0]}: {self.value:.3f} deg"
        return f"clearance between segments {self.indices}: {self.value:.5f}"


def normalize(vertices, class_id: int = 0) -> Paperclip:
    """Translate centroid to the origin and scale the farthest vertex to norm 1."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.shape != (N_VERTICES, 3):
        raise ValueError(f"expected {N_VERTICES} 3D vertices, got shape {v.shape}")
    v = v - v.mean(axis=0)
    r = float(np.max(np.linalg.norm(v, axis=1)))
    if r < 1e-12:
        raise DegenerateObject("all vertices coincide")
    return Paperclip(v / r, class_id)


def interior_angles_deg(vertices: np.ndarray) -> np.ndarray:
    """Angle at each interior vertex between the two segments meeting there.

    180 deg is a straight continuation, 0 deg a full fold-back.
    """
    a = vertices[:-2] - vertices[1:-1]
    b = vertices[2:] - vertices[1:-1]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.maximum(na * nb, 1e-300)
    cosang = np.clip(np.sum(a * b, axis=1) / denom, -1.0, 1.0)
    return np.degrees(np.arccos(cosang))


def segment_distance(p1, q1, p2, q2) -> float:
    """Closest distance between 3D segments [p1,q1] and [p2,q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    eps = 1e-300
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = float(d1 @ r)
        if e <= eps:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


def validate(p: Paperclip, config: GenConfig) -> list[Violation]:
    """All angle and clearance violations of p; empty when p is acceptable."""
    v = p.vertices
    out = []
    angles = interior_angles_deg(v)
    for i, ang in enumerate(angles, start=1):
        if ang < config.min_segment_angle_deg:
            out.append(Violation("sharp_angle", (i,), float(ang)))
    for i in range(N_SEGMENTS):
        for j in range(i + 2, N_SEGMENTS):
            d = segment_distance(v[i], v[i + 1], v[j], v[j + 1])
            if d < config.min_clearance:
                out.append(Violation("clearance", (i, j), d))
    return out


def _sample_chain(rng: np.random.Generator, step_range) -> np.ndarray:
    dirs = rng.normal(size=(N_VERTICES - 1, 3))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    steps = rng.uniform(step_range[0], step_range[1], size=(N_VERTICES - 1, 1))
    pts = np.zeros((N_VERTICES, 3))
    pts[1:] = np.cumsum(dirs / norms * steps, axis=0)
    return pts


def generate_paperclip(config: GenConfig, class_id: int) -> Paperclip:
    """Rejection-sample one valid paperclip; deterministic in (seed, class_id)."""
    rng = class_rng(config.seed, class_id)
    for _ in range(config.max_attempts):
        clip = normalize(_sample_chain(rng, config.step_range), class_id)
        if not validate(clip, config):
            return clip
    raise GenerationExhausted(
        f"no valid paperclip for class {class_id} after {config.max_attempts} attempts"
    )


def generate_classes(config: GenConfig, n_classes: int) -> list[Paperclip]:
    return [generate_paperclip(config, k) for k in range(n_classes)]


# Geometry files: one JSON per class plus a run manifest, written by the
# `gen` CLI and read back by `render`.

GEOMETRY_MANIFEST = "geometry_manifest.json"


def config_to_dict(config: GenConfig) -> dict:
    return {
        "seed": config.seed,
        "step_range": list(config.step_range),
        "min_segment_angle_deg": config.min_segment_angle_deg,
        "min_clearance": config.min_clearance,
        "max_attempts": config.max_attempts,
    }


def config_from_dict(d: dict) -> GenConfig:
    return GenConfig(
        seed=d["seed"],
        step_range=tuple(d["step_range"]),
        min_segment_angle_deg=d["min_segment_angle_deg"],
        min_clearance=d["min_clearance"],
        max_attempts=d["max_attempts"],
    )


def write_geometry_dir(clips: list[Paperclip], config: GenConfig, out_dir: str) -> str:
    """Write per-class geometry JSON files and the run manifest; returns manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for clip in clips:
        name = f"clip_{clip.class_id:05d}.json"
        with open(os.path.join(out_dir, name), "w") as fh:
            json.dump({"class_id": clip.class_id, "vertices": clip.vertices.tolist()}, fh)
        files.append(name)
    manifest = {
        "format_version": 1,
        "generator": config_to_dict(config),
        "num_classes": len(clips),
        "files": files,
    }
    path = os.path.join(out_dir, GEOMETRY_MANIFEST)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, separators=(",", ":"))
    os.replace(tmp, path)
    return path


def read_geometry_dir(path: str) -> tuple[list[Paperclip], GenConfig]:
    with open(os.path.join(path, GEOMETRY_MANIFEST)) as fh:
        manifest = json.load(fh)
    clips = []
    for name in manifest["files"]:
        with open(os.path.join(path, name)) as fh:
            d = json.load(fh)
        clips.append(Paperclip(np.array(d["vertices"]), d["class_id"]))
    return clips, config_from_dict(manifest["generator"])
