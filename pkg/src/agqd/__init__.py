"""agqd: attention-guided query sampling and query-driven feature aggregation.

Desk-scale implementations of two query mechanisms for multi-view 3D
detection pipelines built on feed-forward reconstruction encoders —
priority sampling of object-query locations from attention-weighted point
clouds, and see-query-driven blending of multi-level encoder features —
together with the evaluation (axis-aligned IoU, mAP), noise-injection and
synthetic-scene machinery needed to exercise them.
"""

from .core import (
    AttentionField,
    Box3D,
    DetectionSet,
    EmptyCloudError,
    FeatureLevels,
    NotEnoughPointsError,
    PackingFailedError,
    PointCloud,
    RotatedBoxUnsupportedError,
    SampleSet,
    SamplerConfig,
    Scene,
    ShapeError,
    ValidationError,
    bounding_range,
    wrap_yaw,
)
from .metrics import SCANNET18_CLASSES, EvalConfig, average_precision, iou_aabb, mean_ap
from .noise import NoiseConfig, perturb
from .qdagg import (
    DecoderLayerParams,
    DecoderParams,
    HeadParams,
    SeeQueryState,
    aggregate,
    decoder_forward,
    decoder_layer,
    detection_head,
    grad_check_weights,
    see_weights,
)
from .sampling import ag_sample, ag_sample_oracle, fps, normalize_attention
from .synthgen import SceneSpec, concentration, generate

__version__ = "0.1.0"

__all__ = [
    "AttentionField",
    "Box3D",
    "DetectionSet",
    "EmptyCloudError",
    "EvalConfig",
    "FeatureLevels",
    "DecoderLayerParams",
    "DecoderParams",
    "HeadParams",
    "NoiseConfig",
    "NotEnoughPointsError",
    "PackingFailedError",
    "PointCloud",
    "RotatedBoxUnsupportedError",
    "SCANNET18_CLASSES",
    "SampleSet",
    "SamplerConfig",
    "Scene",
    "SceneSpec",
    "SeeQueryState",
    "ShapeError",
    "ValidationError",
    "aggregate",
    "ag_sample",
    "ag_sample_oracle",
    "average_precision",
    "bounding_range",
    "concentration",
    "decoder_forward",
    "decoder_layer",
    "detection_head",
    "fps",
    "generate",
    "grad_check_weights",
    "iou_aabb",
    "mean_ap",
    "normalize_attention",
    "perturb",
    "see_weights",
    "wrap_yaw",
]
