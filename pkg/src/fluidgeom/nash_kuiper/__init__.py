"""Convex integration: corrugation profile, primitive metrics, steps and stages."""
from .profile import CorrugationProfile, build_corrugation_profile
from .stages import (
    CSV_COLUMNS,
    EmbedDiagnostics,
    StageParams,
    c2_norm,
    holder_quotient,
    lambda_cap,
    run_embedding,
    run_stage,
    time_switch_sequence,
)
from .steps import (
    Curve,
    PrimitiveMetric,
    cone_fraction,
    corrugation_step,
    cutoff_ramp,
    is_short,
    metric_deficit,
    mollify,
    mollify_map,
    primitive_decomposition,
    recompose,
    spiral_step,
)

__all__ = [
    "CSV_COLUMNS",
    "CorrugationProfile",
    "Curve",
    "EmbedDiagnostics",
    "PrimitiveMetric",
    "StageParams",
    "build_corrugation_profile",
    "c2_norm",
    "cone_fraction",
    "corrugation_step",
    "cutoff_ramp",
    "holder_quotient",
    "is_short",
    "lambda_cap",
    "metric_deficit",
    "mollify",
    "mollify_map",
    "primitive_decomposition",
    "recompose",
    "run_embedding",
    "run_stage",
    "spiral_step",
    "time_switch_sequence",
]
