"""Bridge between rendered view datasets and image-backbone networks.

Consumes dataset manifests produced by the cliplab renderer, trains a
ResNet-class backbone, and writes predictions in the evaluation CSV format
that `cliplab evaluate --external` scores. The bridge itself never computes
generalization metrics; the harness is the single source of truth.
"""

__version__ = "0.1.0"

from .data import (ManifestError, class_ids, iter_records, load_manifest,
                   parse_view_spec, record_poses)
from .predict import PREDICTION_FIELDS, ClassCountMismatch, emit_predictions
from .train import (DivergedTraining, TrainHyper, cosine_lr, load_checkpoint,
                    save_checkpoint, train_backbone)

__all__ = [
    "ManifestError", "class_ids", "iter_records", "load_manifest",
    "parse_view_spec", "record_poses",
    "PREDICTION_FIELDS", "ClassCountMismatch", "emit_predictions",
    "DivergedTraining", "TrainHyper", "cosine_lr", "load_checkpoint",
    "save_checkpoint", "train_backbone",
    "__version__",
]
