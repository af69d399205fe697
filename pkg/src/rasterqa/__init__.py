"""Quantitative spatial question answering over segmentation rasters.

The pixel-geometry substrate (masks, components, metric areas), distance
operations, multi-model fusion, a sandboxed query-plan language, benchmark
generation with human-variability ranges, range-based scoring, and the HTTP
service tying it together.
"""

from .calib import (
    AnnotationRecord,
    AnnotationStore,
    CalibrationConstants,
    acceptable_range,
    icc2k,
    krippendorff_alpha,
    mad,
    madc,
    majority_vote,
)
from .distance import DistanceField, calculate_shape_distances, distance_transform, find_shapes_within_distance
from .fusion import ClassMap, ClassMergeRule, LogitMap, fuse_logits, masks_from_classmap, mode_filter, split_instances
from .llm import CompletionConfig, PromptSpec, build_prompt, extract_plan, request_completion
from .plans import Answer, Plan, Step, execute_plan, parse_plan, serialize_plan, validate_plan
from .questions import (
    QuestionRecord,
    build_mock_table,
    canonical_plan,
    compute_ground_truth,
    emit_dataset,
    generate_questions,
    load_dataset,
)
from .raster import (
    BinaryMask,
    GeoImage,
    PixelRuns,
    SegmentationResult,
    Shape,
    area_hectares,
    connected_components,
    coverage_percentage,
    filter_by_area,
)
from .scoring import (
    Prediction,
    ResultTable,
    aggregate,
    emit_report,
    range_sensitivity,
    score_prediction,
)
from .store import BackendStore
from .service import ServiceClient, make_server

__version__ = "0.1.0"
