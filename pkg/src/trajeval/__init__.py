"""Scenario-based evaluation toolkit for road-user trajectory prediction.

Tags ground-truth tracks by movement type, scores multimodal prediction
files with best-of-K displacement errors on a fixed horizon grid, and
aggregates per-tag / per-horizon / per-class report cells.
"""

from .baseline import NotPredictableError, predict_cv
from .core import (
    CURRENT_INDEX,
    FRAME_DT_S,
    FRAME_RATE_HZ,
    N_FRAMES,
    N_FUTURE,
    N_OBSERVED,
    HorizonGrid,
    PredictionSet,
    RUClass,
    Scene,
    State,
    Track,
    TrajevalError,
    default_horizon_grid,
    rigid_transform_predictions,
    rigid_transform_scene,
    rigid_transform_track,
    speed,
    synthesize_velocities,
)
from .metrics import (
    Metric,
    MetricCell,
    MetricStore,
    NotEvaluableError,
    PerTrackError,
    SceneEvaluation,
    StreamStats,
    UnknownTrackError,
    evaluate_pair,
    evaluate_scene,
    min_ade,
    min_fde,
)
from .synth import (
    UnsatisfiablePatternError,
    declared_tags,
    gen_prediction_with_error,
    gen_scene,
    gen_scenes,
    gen_track,
    parse_pattern,
)
from .tagging import Tag, TagParams, TagSet, tag_frequencies, tag_track

__version__ = "0.1.0"

__all__ = [
    "CURRENT_INDEX",
    "FRAME_DT_S",
    "FRAME_RATE_HZ",
    "HorizonGrid",
    "Metric",
    "MetricCell",
    "MetricStore",
    "N_FRAMES",
    "N_FUTURE",
    "N_OBSERVED",
    "NotEvaluableError",
    "NotPredictableError",
    "PerTrackError",
    "PredictionSet",
    "RUClass",
    "Scene",
    "SceneEvaluation",
    "State",
    "StreamStats",
    "Tag",
    "TagParams",
    "TagSet",
    "Track",
    "TrajevalError",
    "UnknownTrackError",
    "UnsatisfiablePatternError",
    "declared_tags",
    "default_horizon_grid",
    "evaluate_pair",
    "evaluate_scene",
    "gen_prediction_with_error",
    "gen_scene",
    "gen_scenes",
    "gen_track",
    "min_ade",
    "min_fde",
    "parse_pattern",
    "predict_cv",
    "rigid_transform_predictions",
    "rigid_transform_scene",
    "rigid_transform_track",
    "speed",
    "synthesize_velocities",
    "tag_frequencies",
    "tag_track",
]
