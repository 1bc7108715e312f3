"""Annotation-efficient selection of the best model from pairwise judgments."""

from .calibration import (
    CalibrationResult,
    GridSpec,
    auto_select_baseline,
    calibrate,
    noisy_best_model,
    noisy_oracle_vector,
)
from .core import (
    Dataset,
    JudgmentVector,
    NoiseParams,
    Outcome,
    Query,
    annotated_win_rates,
    outcome_score,
    select_final_model,
    win_rate,
)
from .dataset_io import (
    ValidationReport,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from .ngram import WeakJudgePanel, build_panel
from .posterior import Posterior, hypothetical_update, init_uniform, update
from .simulator import (
    CampaignResult,
    MetricsReport,
    RealizationTrajectory,
    annotation_efficiency,
    identification_curve,
    identification_probability,
    labels_to_target,
    run_campaign,
    run_realization,
    settle_budget,
    winrate_gap_percentile,
)
from .strategies import (
    BTFit,
    SelectionState,
    StrategyKind,
    fit_bradley_terry,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BTFit",
    "CalibrationResult",
    "CampaignResult",
    "Dataset",
    "GridSpec",
    "JudgmentVector",
    "MetricsReport",
    "NoiseParams",
    "Outcome",
    "Posterior",
    "Query",
    "RealizationTrajectory",
    "SelectionState",
    "StrategyKind",
    "ValidationReport",
    "WeakJudgePanel",
    "annotated_win_rates",
    "annotation_efficiency",
    "auto_select_baseline",
    "build_panel",
    "calibrate",
    "fit_bradley_terry",
    "hypothetical_update",
    "identification_curve",
    "identification_probability",
    "init_uniform",
    "labels_to_target",
    "load_dataset",
    "noisy_best_model",
    "noisy_oracle_vector",
    "outcome_score",
    "run_campaign",
    "save_dataset",
    "run_realization",
    "select_final_model",
    "settle_budget",
    "step",
    "update",
    "validate_dataset",
    "win_rate",
    "__version__",
]
