"""box2mask: bounding-box annotations -> segmentation pseudo-masks.

Library-first package: superpixel clustering, box-overlap thresholding,
fully-connected CRF smoothing, optional embedding-based boundary
cleanup, and an IoU / log-loss evaluation harness. A thin CLI wraps the
batch operations (see box2mask.cli).
"""

from .assignment import LabelSets, boundary_foreground, overlap_assign, sets_to_mask
from .crf import (CrfParams, UnaryPotentials, gibbs_energy, mean_field_refine,
                  mean_field_refine_dense, unary_from_mask)
from .embedding import (ColorStatsExtractor, EmbeddingBank, FeatureExtractor,
                        OnnxFeatureExtractor, build_embedding_bank, cosine_similarity,
                        extract_patch, load_bank, reassign_boundary, save_bank)
from .errors import (BankError, Box2MaskError, ConfigError, ExtractorError,
                     ParameterError, ValidationError)
from .metrics import EvalReport, evaluate, iou, log_loss
from .pipeline import (GuardParams, PipelineConfig, apply_guards, process_dataset,
                       rapid_boxshrink, robust_boxshrink)
from .slic import SegmentStats, SlicParams, segment_stats, slic_segment
from .types import (BinaryMask, BoundingBox, RgbImage, SuperpixelMap, bbox_to_mask,
                    boxes_to_mask, mask_occupancy, mask_to_bboxes)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
