"""Prediction export in the harness's external-CSV schema.

One row per (class, pose): `class_id,axes,angle1,angle2,predicted_class,
correct`. Evaluation uses the raw rendered frames — no crop at test time.
"""

from __future__ import annotations

import csv

import numpy as np
import torch

from .data import class_ids, iter_records, load_image
from .train import build_model

PREDICTION_FIELDS = ["class_id", "axes", "angle1", "angle2",
                     "predicted_class", "correct"]


class ClassCountMismatch(ValueError):
    """Checkpoint and manifest disagree on the label space."""


def emit_predictions(checkpoint: dict, manifest: dict, out_csv: str,
                     axes: str | None = None, batch_size: int = 256) -> int:
    """Run the checkpointed model over the manifest's records (optionally one
    axes grid) and write the prediction CSV; returns the row count."""
    ids = checkpoint["classes"]
    man_ids = class_ids(manifest)
    if man_ids != list(ids):
        raise ClassCountMismatch(
            f"checkpoint has {len(ids)} classes {ids[:3]}..., manifest has "
            f"{len(man_ids)} classes {man_ids[:3]}...")
    model = build_model(len(ids))
    model.load_state_dict(checkpoint["state_dict"])
    model.eval()
    id_of = np.asarray(ids)
    records = list(iter_records(manifest, axes=axes))
    rows = 0
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_FIELDS)
        with torch.no_grad():
            for start in range(0, len(records), batch_size):
                batch = records[start:start + batch_size]
                x = torch.stack([
                    torch.from_numpy(
                        load_image(manifest, r).transpose(2, 0, 1).copy())
                    .float() / 255.0 for r in batch])
                pred = id_of[model(x).argmax(dim=1).numpy()]
                for rec, p in zip(batch, pred):
                    angles = [float(a) for a in rec["angles"]]
                    angle2 = repr(angles[1]) if len(angles) > 1 else ""
                    correct = "true" if int(p) == int(rec["class_id"]) else "false"
                    writer.writerow([int(rec["class_id"]), rec["axes"],
                                     repr(angles[0]), angle2, int(p), correct])
                    rows += 1
    return rows
