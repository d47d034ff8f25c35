"""
Multilabel metrics and cross-validation aggregation.
"""

from src.evaluation.metrics import (
    LabelMetrics,
    MetricsReport,
    RocCurve,
    confusion_counts,
    crossval_aggregate,
    evaluate_predictions,
    hamming_loss,
    kappa,
    mcc,
    multilabel_accuracy,
    prf1,
    roc_auc,
    summary_row,
)

__all__ = [
    "LabelMetrics",
    "MetricsReport",
    "RocCurve",
    "confusion_counts",
    "crossval_aggregate",
    "evaluate_predictions",
    "hamming_loss",
    "kappa",
    "mcc",
    "multilabel_accuracy",
    "prf1",
    "roc_auc",
    "summary_row",
]
