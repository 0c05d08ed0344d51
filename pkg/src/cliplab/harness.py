"""Experiment harness: generalization profiles over rotation grids, view-based
baselines, intermediate/extrapolation metrics, preset protocols, and CSV/SVG
artifact emission.

A profile holds per-bin accuracy on a single-axis grid (360 bins at 1 deg) or a
dual-axis grid (36 x 36 bins at 10 deg). Classifiers plug in through a single
`predict_batch((N, 8, 2) plane views) -> class ids` method.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .clipgen import GenConfig, config_from_dict, generate_classes
from .mlp import MlpParams, TrainConfig, bin_views, predict, train
from .oracles import (AlignClassifier, LcClassifier, Match2dClassifier,
                      ViewLibrary, reconstruct_library)
from .render import read_manifest
from .scene import (DUAL_AXES, SINGLE_AXES, Camera, PoseSpec, pose_matrix,
                    parse_view_spec, project_plane)

SINGLE_BINS = 360
DUAL_BINS = 36
DUAL_STRIDE = 10.0
POSE_CHUNK = 36  # poses per evaluation batch; bounds peak memory

CLASSIFIER_KINDS = ("mlp", "match2d", "lc", "align3d")


class MissingPoses(ValueError):
    """A requested grid pose has no entry in the manifest / prediction set."""


class PredictionSchemaError(ValueError):
    """An external prediction CSV violates the expected schema."""


class ConditionFailed(RuntimeError):
    """A preset condition failed; carries the originating error as __cause__."""


# ---------------------------------------------------------------------------
# Profiles

@dataclass
class GeneralizationProfile:
    """Accuracy as a function of test-view rotation angle(s)."""

    axes: str
    accuracy: np.ndarray                 # (360,) single or (36, 36) dual
    training_views: tuple = ()           # angles (single) or angle pairs (dual)

    def __post_init__(self):
        self.accuracy = np.asarray(self.accuracy, dtype=np.float64)
        if self.axes in SINGLE_AXES:
            want = (SINGLE_BINS,)
        elif self.axes in DUAL_AXES:
            want = (DUAL_BINS, DUAL_BINS)
        else:
            raise ValueError(f"unknown axes {self.axes!r}")
        if self.accuracy.shape != want:
            raise ValueError(f"accuracy shape {self.accuracy.shape} != {want}")
        if np.any(self.accuracy < 0) or np.any(self.accuracy > 1):
            raise ValueError("accuracy outside [0, 1]")
        self.training_views = tuple(self.training_views)

    @property
    def is_dual(self) -> bool:
        return len(self.axes) == 2

    @property
    def stride(self) -> float:
        return DUAL_STRIDE if self.is_dual else 1.0

    def angles(self) -> np.ndarray:
        return np.arange(0.0, 360.0, self.stride)

    def mean(self) -> float:
        return float(self.accuracy.mean())

    def training_bins(self) -> set:
        if self.is_dual:
            return {(int(round(a / DUAL_STRIDE)) % DUAL_BINS,
                     int(round(b / DUAL_STRIDE)) % DUAL_BINS)
                    for a, b in self.training_views}
        return {int(round(a)) % SINGLE_BINS for a in self.training_views}


def grid_poses(axes: str) -> list[PoseSpec]:
    """The evaluation grid for one axis (360 @ 1 deg) or pair (36x36 @ 10 deg)."""
    if axes in SINGLE_AXES:
        return [PoseSpec(axes, (float(a),)) for a in range(SINGLE_BINS)]
    if axes in DUAL_AXES:
        ticks = np.arange(DUAL_BINS) * DUAL_STRIDE
        return [PoseSpec(axes, (float(a), float(b))) for a in ticks for b in ticks]
    raise ValueError(f"unknown axes {axes!r}")


def train_markers(train_poses, axes: str) -> tuple:
    """Training poses expressed on the `axes` grid (drops inexpressible ones)."""
    marks = []
    for p in train_poses or ():
        if p.axes == axes:
            marks.append(p.angles_deg if len(axes) == 2 else p.angles_deg[0])
        elif len(axes) == 2 and p.axes in axes:
            theta = p.angles_deg[0]
            marks.append((theta, 0.0) if axes.index(p.axes) == 0 else (0.0, theta))
    return tuple(sorted(set(marks)))


# ---------------------------------------------------------------------------
# Grid evaluation

def class_views_at_poses(clips, poses, cam: Camera) -> np.ndarray:
    """(P, C, 8, 2) plane-coordinate views of every clip at every pose."""
    pts = np.stack([c.vertices for c in clips])            # (C, 8, 3)
    cent = pts.mean(axis=1, keepdims=True)
    rots = np.stack([pose_matrix(p) for p in poses])       # (P, 3, 3)
    rotated = np.einsum("pij,cvj->pcvi", rots, pts - cent) + cent
    return project_plane(rotated, cam)


def evaluate_profile(classifier, clips, axes: str, cam: Camera | None = None,
                     train_poses=(), chunk: int = POSE_CHUNK) -> GeneralizationProfile:
    """Accuracy per grid bin = fraction of classes classified correctly there."""
    cam = cam or Camera()
    poses = grid_poses(axes)
    class_ids = np.array([c.class_id for c in clips])
    acc = np.empty(len(poses))
    for start in range(0, len(poses), chunk):
        sub = poses[start:start + chunk]
        views = class_views_at_poses(clips, sub, cam)
        pred = classifier.predict_batch(views.reshape(-1, *views.shape[2:]))
        pred = np.asarray(pred).reshape(len(sub), len(clips))
        acc[start:start + len(sub)] = (pred == class_ids[None, :]).mean(axis=1)
    if axes in DUAL_AXES:
        acc = acc.reshape(DUAL_BINS, DUAL_BINS)
    return GeneralizationProfile(axes, acc, train_markers(train_poses, axes))


def clips_from_manifest(manifest: dict):
    """Regenerate the manifest's paperclips from its embedded generator config."""
    gen = manifest.get("generator")
    if not gen or "config" not in gen:
        raise ValueError("manifest lacks an embedded generator config")
    config = config_from_dict(gen["config"])
    n = int(gen.get("num_classes", manifest.get("num_classes", 0)))
    if n <= 0:
        raise ValueError("manifest generator config lacks a class count")
    return generate_classes(config, n)


def manifest_train_poses(manifest: dict) -> list[PoseSpec]:
    keys = {(r["axes"], tuple(r["angles"]))
            for r in manifest["records"] if r.get("split") == "train"}
    return [PoseSpec(a, t) for a, t in sorted(keys)]


def evaluate(classifier, manifest, axes: str,
             train_poses=None, chunk: int = POSE_CHUNK) -> GeneralizationProfile:
    """Profile a classifier on one grid of a dataset manifest.

    The manifest must contain every grid pose (MissingPoses otherwise); views
    are regenerated from its embedded generator config and camera.
    """
    man = read_manifest(manifest) if not isinstance(manifest, dict) else manifest
    poses = grid_poses(axes)
    have = {(r["axes"], tuple(float(a) for a in r["angles"])) for r in man["records"]}
    missing = [p for p in poses if (p.axes, p.angles_deg) not in have]
    if missing:
        raise MissingPoses(
            f"manifest lacks {len(missing)} poses on grid {axes!r}, "
            f"e.g. {missing[0].axes}:{missing[0].angles_deg}")
    clips = clips_from_manifest(man)
    cam = Camera.from_json(man["camera"])
    if train_poses is None:
        train_poses = manifest_train_poses(man)
    return evaluate_profile(classifier, clips, axes, cam, train_poses, chunk)


# ---------------------------------------------------------------------------
# Classifier construction

@dataclass
class MlpAdapter:
    """Wraps trained MLP parameters as a grid-evaluable classifier."""

    params: MlpParams
    cam: Camera
    class_ids: np.ndarray
    bins: int
    train_accuracy: float = float("nan")
    name: str = "mlp"

    def predict_batch(self, views: np.ndarray) -> np.ndarray:
        X = bin_views(views, self.cam, self.bins)
        pred, _ = predict(self.params, X)
        return self.class_ids[pred]


def training_views_of(clips, train_poses, cam: Camera):
    """(N, 8, 2) views and (N,) position labels, class-major then pose order."""
    views = class_views_at_poses(clips, train_poses, cam)   # (P, C, 8, 2)
    n_p, n_c = views.shape[:2]
    flat = views.transpose(1, 0, 2, 3).reshape(n_p * n_c, *views.shape[2:])
    labels = np.repeat(np.arange(n_c), n_p)
    return flat, labels


def build_classifier(kind: str, clips, train_poses, cam: Camera | None = None,
                     seed: int = 0, mlp_config: TrainConfig | None = None,
                     inplane: bool = False, coord_bins: int = 64):
    """Construct a grid-evaluable classifier of the given kind.

    `inplane` requests in-plane-rotation invariance: augmentation for the MLP,
    rotation-aligned matching for match2d (lc/align3d are inherently invariant
    because in-plane rotation is a linear recombination of the x/y coordinate
    vectors / a pose change).
    """
    cam = cam or Camera()
    if kind == "mlp":
        config = mlp_config or TrainConfig()
        config = replace(config, seed=seed)
        if inplane and config.inplane_rotation_deg is None:
            config = replace(config, inplane_rotation_deg=(0.0, 360.0))
        views, labels = training_views_of(clips, train_poses, cam)
        params, log = train(views, labels, len(clips), cam, config, coord_bins)
        return MlpAdapter(params, cam, np.array([c.class_id for c in clips]),
                          coord_bins, train_accuracy=log.accuracy[-1])
    lib = ViewLibrary.build(clips, train_poses, cam)
    if kind == "match2d":
        return Match2dClassifier(lib, align_rotation=inplane)
    if kind == "lc":
        return LcClassifier(lib)
    if kind == "align3d":
        return AlignClassifier(reconstruct_library(lib))
    raise ValueError(f"unknown classifier kind {kind!r}")


# ---------------------------------------------------------------------------
# Baseline and metrics

def view_based_baseline(single_view_profile: GeneralizationProfile,
                        training_views) -> GeneralizationProfile:
    """Pointwise max of the 0-deg single-view profile shifted to each training
    view: baseline(theta) = max_v profile(theta - v). Shifts round to 1 deg."""
    if single_view_profile.is_dual:
        raise ValueError("baseline construction expects a single-axis profile")
    p = single_view_profile.accuracy
    out = np.zeros_like(p)
    marks = []
    for v in training_views:
        angle = v.angles_deg[0] if isinstance(v, PoseSpec) else float(v)
        np.maximum(out, np.roll(p, int(round(angle)) % SINGLE_BINS), out=out)
        marks.append(angle % 360.0)
    return GeneralizationProfile(single_view_profile.axes, out, sorted(set(marks)))


def classify_bins(training_angles, n_bins: int = SINGLE_BINS) -> list[str]:
    """Label each 1-deg bin 'training', 'intermediate' (inside the circular
    hull of the training angles), or 'extrapolation' (in the largest gap)."""
    t_bins = sorted({int(round(a)) % n_bins for a in training_angles})
    labels = ["extrapolation"] * n_bins
    if not t_bins:
        return labels
    for b in t_bins:
        labels[b] = "training"
    if len(t_bins) == 1:
        return labels
    gaps = []
    for i, a in enumerate(t_bins):
        b = t_bins[(i + 1) % len(t_bins)]
        gaps.append((b - a) % n_bins or n_bins)  # 0 only when i wraps to itself
    widest = int(np.argmax(gaps))
    # Hull = walk from the end of the widest gap around to its start.
    start = t_bins[(widest + 1) % len(t_bins)]
    end = t_bins[widest]
    span = (end - start) % n_bins
    for k in range(1, span + 1):
        b = (start + k) % n_bins
        if labels[b] != "training":
            labels[b] = "intermediate"
    return labels


@dataclass
class ProfileMetrics:
    mean: float
    training_mean: float
    intermediate_mean: float
    extrapolation_mean: float
    gap_to_baseline: float  # mean(observed) - mean(baseline); nan if no baseline

    def to_json(self) -> dict:
        return {k: (None if np.isnan(v) else v) for k, v in vars(self).items()}


def metrics(profile: GeneralizationProfile, training_views=None,
            baseline: GeneralizationProfile | None = None) -> ProfileMetrics:
    """Summary means over the training/intermediate/extrapolation split."""
    if training_views is None:
        training_views = profile.training_views
    acc = profile.accuracy
    gap = acc.mean() - baseline.accuracy.mean() if baseline is not None else np.nan
    if profile.is_dual:
        return ProfileMetrics(float(acc.mean()), np.nan, np.nan, np.nan, float(gap))

    angles = [(v.angles_deg[0] if isinstance(v, PoseSpec) else float(v))
              for v in training_views]
    labels = np.array(classify_bins(angles))

    def mean_of(kind):
        m = labels == kind
        return float(acc[m].mean()) if m.any() else float("nan")

    return ProfileMetrics(float(acc.mean()), mean_of("training"),
                          mean_of("intermediate"), mean_of("extrapolation"),
                          float(gap))


def window_mean(profile: GeneralizationProfile, lo: float, hi: float) -> float:
    """Mean accuracy over bins with angle in [lo, hi] mod 360 (inclusive)."""
    if profile.is_dual:
        raise ValueError("window_mean expects a single-axis profile")
    ang = profile.angles()
    lo, hi = lo % 360.0, hi % 360.0
    mask = (ang >= lo) & (ang <= hi) if lo <= hi else (ang >= lo) | (ang <= hi)
    return float(profile.accuracy[mask].mean())


def half_width(profile: GeneralizationProfile, center: float = 0.0,
               floor: float = 0.0) -> float:
    """Mean one-sided angular distance from `center` at which accuracy first
    drops below halfway between the peak value at `center` and `floor`."""
    if profile.is_dual:
        raise ValueError("half_width expects a single-axis profile")
    acc = profile.accuracy
    c = int(round(center)) % SINGLE_BINS
    level = 0.5 * (acc[c] + floor)
    widths = []
    for step in (1, -1):
        w = SINGLE_BINS // 2
        for k in range(1, SINGLE_BINS // 2 + 1):
            if acc[(c + step * k) % SINGLE_BINS] < level:
                w = k
                break
        widths.append(w)
    return float(np.mean(widths))


# ---------------------------------------------------------------------------
# Result CSV (schema: condition, axis_pair, angle1, angle2, accuracy,
# is_training_view, seed) — floats round-trip via repr.

RESULT_FIELDS = ["condition", "axis_pair", "angle1", "angle2", "accuracy",
                 "is_training_view", "seed"]


@dataclass(frozen=True)
class ResultRow:
    condition: str
    axis_pair: str
    angle1: float
    angle2: float | None
    accuracy: float
    is_training_view: bool
    seed: int


def profile_rows(profile: GeneralizationProfile, condition: str,
                 seed: int) -> list[ResultRow]:
    rows = []
    marks = profile.training_bins()
    if profile.is_dual:
        for i in range(DUAL_BINS):
            for j in range(DUAL_BINS):
                rows.append(ResultRow(condition, profile.axes, i * DUAL_STRIDE,
                                      j * DUAL_STRIDE, float(profile.accuracy[i, j]),
                                      (i, j) in marks, seed))
    else:
        for i in range(SINGLE_BINS):
            rows.append(ResultRow(condition, profile.axes, float(i), None,
                                  float(profile.accuracy[i]), i in marks, seed))
    return rows


def rows_profile(rows: list[ResultRow]) -> GeneralizationProfile:
    """Rebuild a profile from one condition/seed/axes group of rows."""
    axes = rows[0].axis_pair
    if axes in DUAL_AXES:
        acc = np.zeros((DUAL_BINS, DUAL_BINS))
        marks = []
        for r in rows:
            i, j = int(round(r.angle1 / DUAL_STRIDE)), int(round(r.angle2 / DUAL_STRIDE))
            acc[i, j] = r.accuracy
            if r.is_training_view:
                marks.append((r.angle1, r.angle2))
        return GeneralizationProfile(axes, acc, sorted(marks))
    acc = np.zeros(SINGLE_BINS)
    marks = []
    for r in rows:
        acc[int(round(r.angle1))] = r.accuracy
        if r.is_training_view:
            marks.append(r.angle1)
    return GeneralizationProfile(axes, acc, sorted(marks))


def write_results_csv(rows: list[ResultRow], path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([r.condition, r.axis_pair, repr(r.angle1),
                        "" if r.angle2 is None else repr(r.angle2),
                        repr(r.accuracy), "true" if r.is_training_view else "false",
                        r.seed])


def read_results_csv(path: str) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_FIELDS:
            raise ValueError(f"unexpected results header {reader.fieldnames}")
        for rec in reader:
            rows.append(ResultRow(rec["condition"], rec["axis_pair"],
                                  float(rec["angle1"]),
                                  None if rec["angle2"] == "" else float(rec["angle2"]),
                                  float(rec["accuracy"]),
                                  rec["is_training_view"] == "true",
                                  int(rec["seed"])))
    return rows


# ---------------------------------------------------------------------------
# External prediction records (the dl-bridge interchange format)

PREDICTION_FIELDS = ["class_id", "axes", "angle1", "angle2", "predicted_class",
                     "correct"]


@dataclass(frozen=True)
class PredictionRecord:
    class_id: int
    axes: str
    angles: tuple
    predicted_class: int
    correct: bool


def write_prediction_csv(records, path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_FIELDS)
        for r in records:
            angle2 = repr(float(r.angles[1])) if len(r.angles) > 1 else ""
            w.writerow([r.class_id, r.axes, repr(float(r.angles[0])), angle2,
                        r.predicted_class, "true" if r.correct else "false"])


def read_prediction_csv(path: str) -> list[PredictionRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for want in PREDICTION_FIELDS:
            if want not in header:
                raise PredictionSchemaError(f"prediction CSV missing column {want!r}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                angles = (float(rec["angle1"]),)
                if rec["angle2"] not in ("", None):
                    angles += (float(rec["angle2"]),)
                flag = rec["correct"].strip().lower()
                if flag not in ("true", "false", "1", "0"):
                    raise ValueError(f"bad correct flag {rec['correct']!r}")
                records.append(PredictionRecord(
                    int(rec["class_id"]), rec["axes"].strip(), angles,
                    int(rec["predicted_class"]), flag in ("true", "1")))
            except (TypeError, ValueError) as e:
                raise PredictionSchemaError(f"line {lineno}: {e}") from e
    return records


def profile_from_predictions(records, axes: str,
                             train_poses=()) -> GeneralizationProfile:
    """Per-bin mean of the `correct` flag; every grid bin must be covered."""
    if axes in DUAL_AXES:
        hits = np.zeros((DUAL_BINS, DUAL_BINS))
        count = np.zeros((DUAL_BINS, DUAL_BINS))
    else:
        hits = np.zeros(SINGLE_BINS)
        count = np.zeros(SINGLE_BINS)
    for r in records:
        if r.axes != axes:
            continue
        if axes in DUAL_AXES:
            if len(r.angles) != 2:
                raise PredictionSchemaError(
                    f"dual-axis record {r.class_id}/{r.axes} lacks angle2")
            key = (int(round(r.angles[0] / DUAL_STRIDE)) % DUAL_BINS,
                   int(round(r.angles[1] / DUAL_STRIDE)) % DUAL_BINS)
        else:
            key = int(round(r.angles[0])) % SINGLE_BINS
        hits[key] += r.correct
        count[key] += 1
    if np.any(count == 0):
        n_missing = int(np.sum(count == 0))
        raise MissingPoses(f"{n_missing} bins on grid {axes!r} have no predictions")
    return GeneralizationProfile(axes, hits / count, train_markers(train_poses, axes))


# ---------------------------------------------------------------------------
# SVG plots (hand-rolled; byte-deterministic)

_W, _H = 720, 400
_ML, _MR, _MT, _MB = 62, 16, 34, 46
_PW, _PH = _W - _ML - _MR, _H - _MT - _MB


def _sx(angle: float) -> float:
    return _ML + angle / 360.0 * _PW


def _sy(acc: float) -> float:
    return _MT + (1.0 - acc) * _PH


def _polyline(xs, ys, stroke, width="2", dash=None, opacity=None) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    extra += f' stroke-opacity="{opacity}"' if opacity else ""
    return (f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"'
            f'{extra} points="{pts}" />')


def profile_svg(profile: GeneralizationProfile,
                baseline: GeneralizationProfile | None = None,
                chance: float | None = None, title: str = "") -> str:
    """Line plot: red observed, gray baseline, orange fill where observed
    exceeds the baseline, ticks at training views, dashed chance level."""
    if profile.is_dual:
        return heatmap_svg(profile, title)
    ang = profile.angles()
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{_W}" height="{_H}" fill="white" />']
    if title:
        out.append(f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" '
                   f'font-size="14">{title}</text>')
    # axes, ticks, labels
    out.append(_polyline([_ML, _ML, _ML + _PW], [_MT, _MT + _PH, _MT + _PH],
                         "#333333", width="1"))
    for a in range(0, 361, 60):
        x = _sx(a)
        out.append(_polyline([x, x], [_MT + _PH, _MT + _PH + 4], "#333333", width="1"))
        out.append(f'<text x="{x:.2f}" y="{_MT + _PH + 18:.2f}" '
                   f'text-anchor="middle">{a}</text>')
    for frac in range(0, 6):
        v = frac / 5.0
        y = _sy(v)
        out.append(_polyline([_ML - 4, _ML], [y, y], "#333333", width="1"))
        out.append(f'<text x="{_ML - 8:.2f}" y="{y + 4:.2f}" '
                   f'text-anchor="end">{v:.1f}</text>')
    out.append(f'<text x="{_ML + _PW / 2:.0f}" y="{_H - 8}" '
               f'text-anchor="middle">rotation ({profile.axes}-axis, deg)</text>')
    out.append(f'<text x="14" y="{_MT + _PH / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {_MT + _PH / 2:.0f})">accuracy</text>')
    if baseline is not None:
        obs, base = profile.accuracy, baseline.accuracy
        above = obs > base
        runs, start = [], None
        for i, flag in enumerate(above):
            if flag and start is None:
                start = i
            elif not flag and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(above) - 1))
        for lo, hi in runs:
            idx = list(range(lo, hi + 1))
            fwd = [f"{_sx(ang[i]):.2f},{_sy(obs[i]):.2f}" for i in idx]
            back = [f"{_sx(ang[i]):.2f},{_sy(base[i]):.2f}" for i in reversed(idx)]
            out.append(f'<polygon fill="#f5a623" fill-opacity="0.45" stroke="none" '
                       f'points="{" ".join(fwd + back)}" />')
        out.append(_polyline([_sx(a) for a in ang], [_sy(v) for v in base],
                             "#9b9b9b"))
    if chance is not None:
        y = _sy(chance)
        out.append(_polyline([_ML, _ML + _PW], [y, y], "#9b9b9b", width="1",
                             dash="5,4"))
    out.append(_polyline([_sx(a) for a in ang],
                         [_sy(v) for v in profile.accuracy], "#d0021b"))
    for mark in sorted(profile.training_bins()):
        x = _sx(mark)
        out.append(_polyline([x, x], [_MT + _PH - 10, _MT + _PH], "#2f4f9e",
                             width="2.5"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap_svg(profile: GeneralizationProfile, title: str = "") -> str:
    """36x36 heatmap, white (0) to red (1), training poses as blue dots."""
    if not profile.is_dual:
        raise ValueError("heatmap_svg expects a dual-axis profile")
    cell = 12
    ml, mt = 56, 34
    size = DUAL_BINS * cell
    w, h = ml + size + 16, mt + size + 46
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
           f'<rect width="{w}" height="{h}" fill="white" />']
    if title:
        out.append(f'<text x="{w / 2:.0f}" y="20" text-anchor="middle" '
                   f'font-size="14">{title}</text>')
    hi = np.array([178, 24, 43])
    lo = np.array([255, 255, 255])
    for i in range(DUAL_BINS):
        for j in range(DUAL_BINS):
            rgb = np.rint(lo + (hi - lo) * profile.accuracy[i, j]).astype(int)
            out.append(f'<rect x="{ml + i * cell}" y="{mt + j * cell}" '
                       f'width="{cell}" height="{cell}" '
                       f'fill="rgb({rgb[0]},{rgb[1]},{rgb[2]})" />')
    for a in range(0, 361, 90):
        px = ml + a / 360.0 * size
        py = mt + a / 360.0 * size
        out.append(f'<text x="{px:.0f}" y="{mt + size + 16}" '
                   f'text-anchor="middle">{a}</text>')
        out.append(f'<text x="{ml - 6}" y="{py:.0f}" text-anchor="end">{a}</text>')
    out.append(f'<text x="{ml + size / 2:.0f}" y="{mt + size + 36}" '
               f'text-anchor="middle">{profile.axes[0]}-axis (deg)</text>')
    out.append(f'<text x="16" y="{mt + size / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + size / 2:.0f})">'
               f'{profile.axes[1]}-axis (deg)</text>')
    for (i, j) in sorted(profile.training_bins()):
        out.append(f'<circle cx="{ml + (i + 0.5) * cell:.1f}" '
                   f'cy="{mt + (j + 0.5) * cell:.1f}" r="3" fill="#2166ac" />')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Presets

@dataclass(frozen=True)
class Condition:
    name: str
    train_spec: str
    classes: int | None = None   # overrides the run-level class count
    inplane: bool = False


@dataclass(frozen=True)
class Preset:
    name: str
    default_classes: int
    conditions: tuple[Condition, ...]


def _uniform_conditions():
    return tuple(Condition(f"views{k:02d}", f"y:uniform:{k}")
                 for k in (1, 2, 3, 4, 6, 12))


def _range_conditions():
    conds = []
    for r in (30, 60, 90, 135):
        k = 2 * r // 10 + 1
        conds.append(Condition(f"range{r:03d}", f"y:range:-{r}:{r}:{k}"))
    conds.append(Condition("range180", "y:uniform:36"))
    return tuple(conds)


PRESETS = {
    "uniform-views": Preset("uniform-views", 100, _uniform_conditions()),
    "intermediate": Preset("intermediate", 100,
                           (Condition("pm15", "y:-15,15"),)),
    "inplane-aug": Preset("inplane-aug", 100,
                          (Condition("plain", "y:uniform:4"),
                           Condition("inplane", "y:uniform:4", inplane=True))),
    "range-limited": Preset("range-limited", 100,
                            (Condition("pm30x7", "y:range:-30:30:7"),)),
    "extended-range": Preset("extended-range", 100, _range_conditions()),
    "classes-sweep": Preset("classes-sweep", 100,
                            tuple(Condition(f"c{n:04d}", "y:-60,0,60", classes=n)
                                  for n in (10, 100, 1000))),
}


@dataclass
class ExperimentConfig:
    preset: str
    classifier: str = "match2d"
    classes: int | None = None          # None -> preset default
    seeds: tuple[int, ...] = (0, 1, 2)
    out_dir: str = "results"
    eval_axes: tuple[str, ...] = ("x", "y", "z", "xy", "xz", "yz")
    epochs: int | None = None           # mlp override
    view_offset: float = 0.0            # shifts "uniform" training grids
    chance_line: bool = True

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; "
                             f"choose from {sorted(PRESETS)}")
        if self.classifier not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier {self.classifier!r}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("at least one seed required")


def _train_spec_with_offset(spec: str, offset: float) -> str:
    if offset and spec.count(":") == 2 and ":uniform:" in spec:
        return f"{spec}:{offset:g}"
    return spec


def _mlp_config(config: ExperimentConfig) -> TrainConfig:
    tc = TrainConfig()
    if config.epochs is not None:
        tc = replace(tc, epochs=config.epochs)
    return tc


def run_preset(config: ExperimentConfig) -> dict:
    """Run every condition x seed of a preset; write CSV, SVG, summary JSON.

    Baselines (for y-axis profiles) come from a same-kind classifier built on
    the single view y:0 — the "replicated from one view" gray curve — and are
    only available for view-library kinds that accept one view (mlp, match2d).
    """
    preset = PRESETS[config.preset]
    os.makedirs(config.out_dir, exist_ok=True)
    cam = Camera()
    rows: list[ResultRow] = []
    summary = []
    svg_paths = []
    baseline_cache: dict = {}

    def baseline_for(seed: int, clips) -> GeneralizationProfile | None:
        if config.classifier not in ("mlp", "match2d"):
            return None
        key = (seed, len(clips))
        if key not in baseline_cache:
            one = [PoseSpec("y", (0.0,))]
            clf = build_classifier(config.classifier, clips, one, cam, seed=seed,
                                   mlp_config=_mlp_config(config))
            baseline_cache[key] = evaluate_profile(clf, clips, "y", cam, one)
        return baseline_cache[key]

    for cond in preset.conditions:
        for seed in config.seeds:
            try:
                n_classes = cond.classes or config.classes or preset.default_classes
                clips = generate_classes(GenConfig(seed=seed), n_classes)
                spec = _train_spec_with_offset(cond.train_spec, config.view_offset)
                train_poses = parse_view_spec(spec)
                clf = build_classifier(config.classifier, clips, train_poses, cam,
                                       seed=seed, mlp_config=_mlp_config(config),
                                       inplane=cond.inplane)
                ref = baseline_for(seed, clips)
                y_angles = [p.angles_deg[0] for p in train_poses if p.axes == "y"]
                base = (view_based_baseline(ref, y_angles)
                        if ref is not None and y_angles else None)
                chance = 1.0 / n_classes if config.chance_line else None
                for axes in config.eval_axes:
                    prof = evaluate_profile(clf, clips, axes, cam, train_poses)
                    rows.extend(profile_rows(prof, cond.name, seed))
                    m = metrics(prof, train_poses,
                                base if axes == "y" and base is not None else None)
                    entry = {"condition": cond.name, "seed": seed,
                             "classes": n_classes, "axes": axes,
                             "train_spec": spec}
                    entry.update(m.to_json())
                    if isinstance(clf, MlpAdapter):
                        entry["train_accuracy"] = clf.train_accuracy
                    summary.append(entry)
                    name = f"{cond.name}_s{seed}_{axes}.svg"
                    svg = profile_svg(prof,
                                      base if axes == "y" else None,
                                      chance,
                                      title=f"{preset.name}/{cond.name} "
                                            f"[{config.classifier}] {axes}-axis")
                    with open(os.path.join(config.out_dir, name), "w") as fh:
                        fh.write(svg)
                    svg_paths.append(os.path.join(config.out_dir, name))
            except Exception as e:
                raise ConditionFailed(
                    f"condition {cond.name!r} seed {seed}: {e}") from e

    csv_path = os.path.join(config.out_dir, "results.csv")
    write_results_csv(rows, csv_path)
    summary_path = os.path.join(config.out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump({"preset": preset.name, "classifier": config.classifier,
                   "seeds": list(config.seeds), "results": summary}, fh, indent=2)
    return {"preset": preset.name, "classifier": config.classifier,
            "rows": rows, "summary": summary, "csv_path": csv_path,
            "summary_path": summary_path, "svg_paths": svg_paths}
