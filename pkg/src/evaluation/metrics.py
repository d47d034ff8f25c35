"""
Multilabel evaluation.

Y_true and Y_pred are binary [N, K] matrices in label order; scores are
probabilities of the same shape. Headline conventions:

    accuracy      labelwise, 1 - Hamming loss (subset accuracy reported too)
    P / R / F1    macro averages of per-label scores (micro reported too)
    MCC, kappa    computed over the pooled N*K binary decisions
    AUC           unweighted mean over labels that have both classes

Degenerate cases (zero denominators, single-class labels) yield 0 or are
excluded, and each one leaves a message in `MetricsReport.flags`.
"""

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    auc,
    cohen_kappa_score,
    matthews_corrcoef,
    precision_recall_fscore_support,
    roc_curve,
)
from sklearn.metrics import hamming_loss as _sk_hamming_loss

from src import LABELS
from src.exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)

AVERAGING_MODES = ("macro", "micro")
ACCURACY_MODES = ("labelwise", "subset")

HEADLINE_METRICS = (
    "accuracy", "subset_accuracy", "hamming_loss",
    "precision", "recall", "f1",
    "micro_precision", "micro_recall", "micro_f1",
    "mcc", "kappa", "auc",
)
LABEL_METRICS = ("accuracy", "hamming_loss", "precision", "recall", "f1", "mcc", "kappa", "auc")
SUMMARY_COLUMNS = (
    ("Accuracy", "accuracy"),
    ("Hamming Loss", "hamming_loss"),
    ("Precision", "precision"),
    ("Recall", "recall"),
    ("F1", "f1"),
    ("MCC", "mcc"),
    ("Kappa", "kappa"),
    ("AUC", "auc"),
)


def _check_pair(Y_true, Y_pred, binary_pred: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    Y_true = np.asarray(Y_true)
    Y_pred = np.asarray(Y_pred)
    if Y_true.ndim == 1:
        Y_true = Y_true[:, None]
    if Y_pred.ndim == 1:
        Y_pred = Y_pred[:, None]
    if Y_true.shape != Y_pred.shape:
        raise DimensionError(f"shape mismatch: y_true {Y_true.shape} vs y_pred {Y_pred.shape}")
    if not np.isin(Y_true, (0, 1)).all():
        raise ValueError("y_true must be binary")
    if binary_pred and not np.isin(Y_pred, (0, 1)).all():
        raise ValueError("y_pred must be binary")
    return Y_true.astype(np.int64), (Y_pred.astype(np.int64) if binary_pred else Y_pred.astype(np.float64))


def _flat_if_single(Y: np.ndarray) -> np.ndarray:
    # scikit-learn reads a one-column matrix as a binary target, not a multilabel one
    return Y.ravel() if Y.shape[1] == 1 else Y


def hamming_loss(Y_true, Y_pred) -> float:
    """Fraction of mismatched label cells."""
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    if Y_true.size == 0:
        return 0.0
    return float(_sk_hamming_loss(_flat_if_single(Y_true), _flat_if_single(Y_pred)))


def multilabel_accuracy(Y_true, Y_pred, mode: str = "labelwise") -> float:
    """
    Args:
        mode: `labelwise` (1 - Hamming loss) or `subset` (rows with every label right)
    """
    if mode not in ACCURACY_MODES:
        raise ConfigError(f"accuracy mode must be one of {', '.join(ACCURACY_MODES)}, got {mode!r}")
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    if Y_true.size == 0:
        return 0.0
    if mode == "labelwise":
        return 1.0 - hamming_loss(Y_true, Y_pred)
    return float(accuracy_score(_flat_if_single(Y_true), _flat_if_single(Y_pred)))


def confusion_counts(Y_true, Y_pred) -> np.ndarray:
    """Per-label [tp, fp, fn, tn] rows, shape [K, 4]."""
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    tp = ((Y_true == 1) & (Y_pred == 1)).sum(axis=0)
    fp = ((Y_true == 0) & (Y_pred == 1)).sum(axis=0)
    fn = ((Y_true == 1) & (Y_pred == 0)).sum(axis=0)
    tn = ((Y_true == 0) & (Y_pred == 0)).sum(axis=0)
    return np.stack([tp, fp, fn, tn], axis=1)


def prf1(
    Y_true, Y_pred, averaging: str = "macro", flags: Optional[List[str]] = None
) -> Tuple[float, float, float]:
    """
    Precision, recall and F1.

    `micro` pools TP/FP/FN over labels; `macro` averages per-label precision and
    recall. In both modes F1 is the harmonic mean of the returned precision and
    recall (0 when both are 0). Zero-denominator scores count as 0 and are
    reported through `flags`.
    """
    if averaging not in AVERAGING_MODES:
        raise ConfigError(f"averaging must be one of {', '.join(AVERAGING_MODES)}, got {averaging!r}")
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    if flags is not None:
        counts = confusion_counts(Y_true, Y_pred)
        names = _label_names(Y_true.shape[1])
        for name, (tp, fp, fn, _) in zip(names, counts):
            if tp + fp == 0:
                flags.append(f"{name}: no predicted positives, precision set to 0")
            if tp + fn == 0:
                flags.append(f"{name}: no true positives, recall set to 0")
    if Y_true.size == 0:
        return 0.0, 0.0, 0.0
    # with one label both averages reduce to the binary scores
    average = "binary" if Y_true.shape[1] == 1 else averaging
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p, r, _, _ = precision_recall_fscore_support(
            _flat_if_single(Y_true), _flat_if_single(Y_pred), average=average, zero_division=0
        )
    p, r = float(p), float(r)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _degenerate(vector: np.ndarray) -> bool:
    return vector.size == 0 or np.all(vector == vector.flat[0])


def mcc(Y_true, Y_pred, flags: Optional[List[str]] = None) -> float:
    """Matthews correlation over the pooled label cells; 0 when a marginal has no variance."""
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    t, p = Y_true.ravel(), Y_pred.ravel()
    if _degenerate(t) or _degenerate(p):
        if flags is not None:
            flags.append("mcc: a pooled marginal has zero variance, set to 0")
        return 0.0
    return float(matthews_corrcoef(t, p))


def kappa(Y_true, Y_pred, flags: Optional[List[str]] = None) -> float:
    """Cohen's kappa over the pooled label cells; 0 when chance agreement is total."""
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    t, p = Y_true.ravel(), Y_pred.ravel()
    if t.size == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value = float(cohen_kappa_score(t, p))
    if not np.isfinite(value):
        if flags is not None:
            flags.append("kappa: expected agreement is 1, set to 0")
        return 0.0
    return value


@dataclass
class RocCurve:
    """ROC points for one label; `area` is NaN when the label has a single class."""

    label: str
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    area: float

    @property
    def defined(self) -> bool:
        return bool(np.isfinite(self.area))

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(Y_true, scores, flags: Optional[List[str]] = None) -> Tuple[List[RocCurve], float]:
    """
    Per-label ROC curves and the macro AUC.

    Each distinct score is one threshold step (tied scores move together);
    the area is trapezoidal. Labels lacking positives or negatives get an
    undefined curve and are left out of the macro mean.
    """
    Y_true, scores = _check_pair(Y_true, scores, binary_pred=False)
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    names = _label_names(Y_true.shape[1])
    curves = []
    areas = []
    for k, name in enumerate(names):
        y = Y_true[:, k]
        if y.size == 0 or y.min() == y.max():
            if flags is not None:
                flags.append(f"{name}: only one class present, excluded from macro AUC")
            empty = np.zeros(0)
            curves.append(RocCurve(name, empty, empty, empty, float("nan")))
            continue
        fpr, tpr, thresholds = roc_curve(y, scores[:, k], drop_intermediate=False)
        area = float(auc(fpr, tpr))
        curves.append(RocCurve(name, fpr, tpr, thresholds, area))
        areas.append(area)
    if not areas:
        if flags is not None:
            flags.append("auc: no label has both classes, macro AUC undefined")
        return curves, float("nan")
    return curves, float(np.mean(areas))


@dataclass
class LabelMetrics:
    accuracy: float = 0.0
    hamming_loss: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    mcc: float = 0.0
    kappa: float = 0.0
    auc: float = float("nan")
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0


@dataclass
class MetricsReport:
    """
    Headline metrics, per-label breakdown and any degenerate-case flags.

    `std` is filled only for cross-validation aggregates (sample standard
    deviation across folds, keyed like the headline metrics).
    """

    accuracy: float = 0.0
    subset_accuracy: float = 0.0
    hamming_loss: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    micro_precision: float = 0.0
    micro_recall: float = 0.0
    micro_f1: float = 0.0
    mcc: float = 0.0
    kappa: float = 0.0
    auc: float = float("nan")
    per_label: Dict[str, LabelMetrics] = field(default_factory=dict)
    n_examples: int = 0
    averaging_mode: str = "macro"
    threshold: float = 0.5
    flags: List[str] = field(default_factory=list)
    std: Dict[str, float] = field(default_factory=dict)
    roc: List[RocCurve] = field(default_factory=list, repr=False)

    def headline(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in HEADLINE_METRICS}

    def to_dict(self) -> Dict:
        data = asdict(self)
        data.pop("roc")
        return data


def _label_names(k: int) -> Tuple[str, ...]:
    return LABELS if k == len(LABELS) else tuple(f"label_{i}" for i in range(k))


def evaluate_predictions(
    Y_true,
    scores,
    threshold: float = 0.5,
    averaging: str = "macro",
) -> MetricsReport:
    """
    Full report from probabilities.

    Args:
        Y_true: Binary [N, K] targets
        scores: Probabilities [N, K]
        threshold: Inclusive decision threshold
        averaging: Headline P/R/F1 averaging (`macro` or `micro`)

    Returns:
        MetricsReport with ROC curves attached
    """
    Y_true, scores = _check_pair(Y_true, scores, binary_pred=False)
    Y_pred = (scores >= threshold).astype(np.int64)
    flags: List[str] = []

    headline_prf = prf1(Y_true, Y_pred, averaging, flags)
    micro = prf1(Y_true, Y_pred, "micro")
    curves, macro_auc = roc_auc(Y_true, scores, flags)
    counts = confusion_counts(Y_true, Y_pred)

    per_label = {}
    for k, name in enumerate(_label_names(Y_true.shape[1])):
        yt, yp = Y_true[:, k:k + 1], Y_pred[:, k:k + 1]
        label_flags: List[str] = []
        p, r, f = prf1(yt, yp, "micro")
        tp, fp, fn, tn = (int(v) for v in counts[k])
        per_label[name] = LabelMetrics(
            accuracy=multilabel_accuracy(yt, yp),
            hamming_loss=hamming_loss(yt, yp),
            precision=p, recall=r, f1=f,
            mcc=mcc(yt, yp, label_flags),
            kappa=kappa(yt, yp, label_flags),
            auc=curves[k].area,
            tp=tp, fp=fp, fn=fn, tn=tn,
        )
        flags.extend(f"{name}: {msg}" for msg in label_flags)

    report = MetricsReport(
        accuracy=multilabel_accuracy(Y_true, Y_pred, "labelwise"),
        subset_accuracy=multilabel_accuracy(Y_true, Y_pred, "subset"),
        hamming_loss=hamming_loss(Y_true, Y_pred),
        precision=headline_prf[0],
        recall=headline_prf[1],
        f1=headline_prf[2],
        micro_precision=micro[0],
        micro_recall=micro[1],
        micro_f1=micro[2],
        mcc=mcc(Y_true, Y_pred, flags),
        kappa=kappa(Y_true, Y_pred, flags),
        auc=macro_auc,
        per_label=per_label,
        n_examples=int(Y_true.shape[0]),
        averaging_mode=averaging,
        threshold=threshold,
        flags=flags,
        roc=curves,
    )
    for message in flags:
        logger.debug(f"metric flag: {message}")
    return report


def crossval_aggregate(per_fold: Sequence[MetricsReport]) -> MetricsReport:
    """
    Unweighted mean of every metric across folds, with sample standard deviations.

    AUC is averaged over the folds where it is defined; folds where a label
    has a single class are left out and named in the flags.

    Raises:
        ConfigError: With fewer than two folds or mixed averaging modes
    """
    if len(per_fold) < 2:
        raise ConfigError(f"cross-validation aggregation needs at least 2 folds, got {len(per_fold)}")
    modes = {r.averaging_mode for r in per_fold}
    if len(modes) != 1:
        raise ConfigError(f"folds use different averaging modes: {sorted(modes)}")

    flags = [f"fold {i + 1}: {msg}" for i, r in enumerate(per_fold) for msg in r.flags]

    def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
        arr = np.asarray(values, dtype=np.float64)
        return float(np.mean(arr)), float(np.std(arr, ddof=1))

    def _defined_mean_std(values: Sequence[float], what: str) -> Tuple[float, float]:
        arr = np.asarray(values, dtype=np.float64)
        undefined = [int(i) + 1 for i in np.flatnonzero(np.isnan(arr))]
        if undefined:
            flags.append(f"{what}: undefined in folds {undefined}, excluded from the average")
        defined = arr[~np.isnan(arr)]
        if defined.size == 0:
            return float("nan"), float("nan")
        std = float(np.std(defined, ddof=1)) if defined.size > 1 else float("nan")
        return float(np.mean(defined)), std

    headline = {}
    std = {}
    for name in HEADLINE_METRICS:
        values = [getattr(r, name) for r in per_fold]
        if name == "auc":
            headline[name], std[name] = _defined_mean_std(values, "auc")
        else:
            headline[name], std[name] = _mean_std(values)

    per_label = {}
    for label in per_fold[0].per_label:
        values = {}
        for name in LABEL_METRICS:
            column = [getattr(r.per_label[label], name) for r in per_fold]
            if name == "auc":
                values[name] = _defined_mean_std(column, f"{label} auc")[0]
            else:
                values[name] = _mean_std(column)[0]
        for name in ("tp", "fp", "fn", "tn"):
            values[name] = int(sum(getattr(r.per_label[label], name) for r in per_fold))
        per_label[label] = LabelMetrics(**values)

    return MetricsReport(
        **headline,
        per_label=per_label,
        n_examples=int(sum(r.n_examples for r in per_fold)),
        averaging_mode=per_fold[0].averaging_mode,
        threshold=per_fold[0].threshold,
        flags=flags,
        std=std,
    )


def summary_row(report: MetricsReport) -> Dict[str, float]:
    """The comparison-table column set: Accuracy, Hamming Loss, P, R, F1, MCC, Kappa, AUC."""
    return {title: getattr(report, attr) for title, attr in SUMMARY_COLUMNS}
