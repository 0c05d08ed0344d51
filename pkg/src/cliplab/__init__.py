"""cliplab: a laboratory for measuring 3D view generalization.

Procedurally generates paperclip objects, renders rotation-grid view datasets
in three representations, runs three classical recognition oracles (2D
matching, linear combination of views, 3D reconstruction + alignment), trains
a from-scratch MLP, and measures generalization profiles against view-based
baselines.
"""

__version__ = "0.1.0"

from .clipgen import (DegenerateObject, GenConfig, GenerationExhausted,
                      Paperclip, class_rng, generate_classes,
                      generate_paperclip, normalize, read_geometry_dir,
                      validate, write_geometry_dir)
from .scene import (BehindCamera, Camera, PoseSpec, apply_pose,
                    full_protocol_grid, parse_view_spec, pose_grid,
                    pose_matrix, project, project_plane, rotation_matrix,
                    view_points)
from .render import (Mesh, RasterImage, composite_background, coord_array,
                     emit_dataset, load_obj, read_manifest,
                     render_coord_image, render_mesh_flat, render_wireframe)
from .oracles import (AlignClassifier, DegenerateSpan, InsufficientViews,
                      LcClassifier, Match2dClassifier, RankDeficient,
                      Shape3D, ViewLibrary, align_classify, align_residual,
                      lc_classify, lc_residual, match2d, sfm_reconstruct,
                      view_distance)
from .mlp import (DivergedLoss, MlpParams, TrainConfig, load_model,
                  loss_and_grad, predict, save_model, train)
from .harness import (ExperimentConfig, GeneralizationProfile, MissingPoses,
                      PredictionRecord, PredictionSchemaError, build_classifier,
                      evaluate, evaluate_profile, half_width, metrics,
                      profile_from_predictions, run_preset,
                      view_based_baseline, window_mean)
