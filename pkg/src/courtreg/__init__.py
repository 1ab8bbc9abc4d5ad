"""Basketball court registration from keypoint heatmaps."""
from .court import (CameraSide, ClassRole, CourtTemplate, KeypointLayout, SamplingError,
                    SamplingSpec, build_layout, flip_permutation, perspective_offsets)
from .heatmaps import (ClassMap, DecodedKeypoint, HeatmapTensor, decode_keypoints,
                       default_class_weights, one_hot, render_gt_class_map, weighted_ce_loss)
from .homography import (Correspondence, DegenerateInputError, Homography, PointAtInfinityError,
                         RansacConfig, apply, apply_inverse, average_homography, dlt_homography,
                         is_degenerate, ransac_homography)
from .pipeline import (EvaluationReport, FallbackReason, RegistrationResult, estimate_frame,
                       evaluate_dataset, frame_error)

__version__ = "0.1.0"
