"""Dataset-manifest loading for image-backbone training.

The manifest contract is the renderer's `dataset_manifest.json`: a JSON object
with `representation`, `camera`, and a `records` list whose entries carry
`class_id`, `axes`, `angles`, `split`, and (for image representations) a
`path` relative to the manifest's directory.
"""

from __future__ import annotations

import json
import os

import numpy as np
from PIL import Image

IMAGE_REPRESENTATIONS = ("wireframe", "coordimage", "mesh")

RECORD_FIELDS = ("class_id", "axes", "angles", "split")


class ManifestError(ValueError):
    """A dataset manifest violates the expected schema; names the field."""


def load_manifest(path: str) -> dict:
    """Read and validate a dataset manifest (or the directory holding one)."""
    if os.path.isdir(path):
        path = os.path.join(path, "dataset_manifest.json")
    try:
        with open(path) as fh:
            man = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"no manifest at {path}")
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}")
    for field in ("representation", "records", "camera"):
        if field not in man:
            raise ManifestError(f"manifest missing field {field!r}")
    rep = man["representation"]
    if rep not in IMAGE_REPRESENTATIONS:
        raise ManifestError(
            f"representation {rep!r} is not an image kind; "
            f"the bridge consumes one of {IMAGE_REPRESENTATIONS}")
    for i, rec in enumerate(man["records"]):
        for field in RECORD_FIELDS + ("path",):
            if field not in rec:
                raise ManifestError(f"record {i} missing field {field!r}")
    man["_root"] = os.path.dirname(os.path.abspath(path))
    return man


def iter_records(manifest: dict, split: str | None = None,
                 axes: str | None = None):
    """Yield manifest records, optionally filtered by split tag and/or axes."""
    for rec in manifest["records"]:
        if split is not None and rec["split"] != split:
            continue
        if axes is not None and rec["axes"] != axes:
            continue
        yield rec


def record_poses(records):
    return [(r["axes"], tuple(float(a) for a in r["angles"])) for r in records]


def class_ids(manifest: dict) -> list[int]:
    return sorted({int(r["class_id"]) for r in manifest["records"]})


def load_image(manifest: dict, record: dict) -> np.ndarray:
    """(H, W, 3) uint8 image for one record."""
    path = os.path.join(manifest["_root"], record["path"])
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def parse_view_spec(spec: str):
    """Training-view grammar shared with the harness CLI:
    "y:0,30,60" | "y:uniform:12[:offset]" | "y:range:-30:30:7",
    with ';' separating groups. Returns [(axes, (angle,)), ...]."""
    poses = []
    for group in spec.split(";"):
        group = group.strip()
        if not group:
            continue
        parts = group.split(":")
        axes = parts[0].strip()
        if axes not in ("x", "y", "z"):
            raise ValueError(f"view spec axis must be x, y, or z, got {axes!r}")
        if len(parts) == 2:
            angles = [float(a) for a in parts[1].split(",") if a.strip()]
            if not angles:
                raise ValueError(f"empty angle list in {group!r}")
        elif parts[1] == "uniform" and len(parts) in (3, 4):
            n = int(parts[2])
            if n <= 0:
                raise ValueError(f"uniform view count must be positive: {group!r}")
            offset = float(parts[3]) if len(parts) == 4 else 0.0
            angles = [offset + 360.0 * k / n for k in range(n)]
        elif parts[1] == "range" and len(parts) == 5:
            lo, hi, n = float(parts[2]), float(parts[3]), int(parts[4])
            if n < 2:
                raise ValueError(f"range needs >= 2 views: {group!r}")
            angles = list(np.linspace(lo, hi, n))
        else:
            raise ValueError(f"unparseable view spec {group!r}")
        poses.extend((axes, (float(a) % 360.0,)) for a in angles)
    if not poses:
        raise ValueError(f"view spec {spec!r} produced no views")
    return poses


def select_training(manifest: dict, view_spec: str | None):
    """Training records: those matching the view spec, else the tagged split."""
    if view_spec:
        want = set(parse_view_spec(view_spec))
        recs = [r for r in manifest["records"]
                if (r["axes"], tuple(float(a) for a in r["angles"])) in want]
        found = {(r["axes"], tuple(float(a) for a in r["angles"])) for r in recs}
        missing = want - found
        if missing:
            raise ManifestError(
                f"manifest lacks {len(missing)} training poses from the view "
                f"spec, e.g. {sorted(missing)[0]}")
        return recs
    recs = list(iter_records(manifest, split="train"))
    if not recs:
        raise ManifestError(
            "manifest has no records tagged split='train'; pass a view spec")
    return recs
