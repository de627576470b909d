"""Popularity-driven placement planning for two-tier (disk plus tape) storage.

The library decides which datasets should stay on disk and with how many
replicas.  It combines a boosted-tree popularity classifier with rank
calibration, a kernel-smoothing usage-intensity forecaster, an explicit
loss-minimizing placement optimizer, and a replay evaluator that scores any
policy against the held-out part of the usage history.
"""

from .catalog import (
    CatalogError,
    DatasetMetadata,
    DatasetRecord,
    PopularMixConfig,
    SplitConfig,
    UsageHistory,
    generate_synthetic_corpus,
    parse_catalog,
    write_catalog,
)
from .evaluation import (
    EvalReport,
    TimeParams,
    baseline_time,
    comparison_report,
    downloading_time,
    eval_intensities,
    eval_intensity,
    evaluate_policy,
    format_report_text,
    identity_plan,
    lru_plan,
    replica_speed_factor,
    write_report_csv,
)
from .features import (
    FEATURE_NAMES,
    LABEL_POPULAR,
    LABEL_UNPOPULAR,
    METADATA_FEATURE_NAMES,
    SERIES_FEATURE_NAMES,
    FeatureVector,
    compute_label,
    extract_corpus_features,
    extract_features,
    feature_matrix,
    labels_array,
    write_feature_csv,
)
from .intensity import (
    IntensityForecast,
    SmoothingResult,
    WindowWidths,
    bandwidth_grid,
    loo_error,
    nw_smooth,
    predict_intensities,
    predict_intensity,
    quantile_window_width,
    rolling_mean,
    rolling_window_widths,
    select_bandwidth_loo,
    write_intensity_csv,
)
from .placement import (
    CostParams,
    PlacementDecision,
    PlacementPlan,
    loss,
    optimal_replicas,
    optimal_replicas_array,
    optimize_plan,
    verify_plan,
    write_plan_csv,
    write_plan_summary,
)
from .popularity import (
    CalibrationMap,
    GbdtConfig,
    GbdtModel,
    PopularityScore,
    cross_predict,
    cross_predict_features,
    fit_calibration,
    load_model,
    popularity,
    popularity_array,
    predict_probability,
    save_model,
    split_halves,
    train_gbdt,
    train_gbdt_xy,
)

__version__ = "0.1.0"
