"""Anomaly segmentation from the raw mask/class outputs of mask-based
semantic segmentation networks: scoring pipeline, query mining, metrics,
file formats, and a CLI."""

from . import bench, errors, heatmap, kernels, metrics, mining, mkio, model, synth
from .heatmap import (
    ABLATION_TOGGLES,
    Toggles,
    accept_map,
    baseline_map,
    combine,
    maskomaly,
    reject_borders,
    reject_map,
    select_inlier_queries,
)
from .metrics import (
    ScoredPixels,
    ThresholdStats,
    auroc,
    average_precision,
    f1_at_threshold,
    fpr_at_tpr,
    mdm,
    merge_stats,
)
from .mining import (
    QueryIoUReport,
    SpecializationReport,
    ground_query_init,
    iou_histogram,
    query_anomaly_iou,
    rank_sweep,
    select_anomalous_queries,
    specialized_queries,
)
from .model import (
    ANOMALY,
    IGNORE,
    INLIER,
    AnomalyMap,
    ClassProbSet,
    HyperParams,
    LabelMap,
    QueryIndexSet,
    SoftMaskSet,
    dominant_query,
    validate_bundle,
)
from .synth import SynthSpec, synth_generate

__version__ = "0.1.0"
