"""CovEval: covering-overlap evaluation for detectors of random-fractal objects.

Cover-area-rate overlap, multi-match XP/XR and the extended F-score, next to
the classical one-to-one mAP pipeline, plus a random-fractal crack synthesizer.
"""
from .errors import (
    ConfigError,
    CovEvalError,
    EmptyEvaluationError,
    EmptySceneError,
    InvalidBoxError,
    ParseError,
    SchemaVersionError,
)
from .evaluate import evaluate, score_image
from .fractal import (
    NoiseModel,
    PolyCurve,
    SyntheticScene,
    TransformParams,
    apply_transform,
    estimate_fractal_dimension,
    extract_subcurve,
    generate_curve,
    make_scene,
    synthesize_annotations,
    topological_order,
)
from .geometry import Box, box_area, car, intersection_area, iou
from .matching import (
    CArMatrix,
    Detection,
    GroundTruth,
    MultiMatchResult,
    OneToOneMatch,
    build_car_matrix,
    greedy_one_to_one_match,
    image_precision_map,
    multi_match,
)
from .metrics import (
    MU_PRESETS,
    ClassScore,
    EvalReport,
    ImageScore,
    aggregate_all,
    aggregate_class,
    f_ext_mu,
    image_scores,
    mu_preset,
)

__version__ = "0.1.0"
