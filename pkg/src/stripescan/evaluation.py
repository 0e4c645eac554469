"""Grouped cross-validation, ROC/AUC, and fold aggregation.

Folds are assigned at the group level (image or patient) so correlated
slices never straddle train and test. ROC thresholds sweep descending
unique scores with ties grouped, which makes the trapezoidal AUC equal the
Mann-Whitney statistic with half credit for score ties.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NoValidFold, SingleClass, TooFewGroups
from .fsutil import atomic_write_text
from .matrix import GROUP_IMAGE, GROUP_PATIENT


@dataclass
class FoldAssignment:
    fold_of_group: dict
    k: int
    group_level: str

    def __post_init__(self):
        if self.group_level not in (GROUP_IMAGE, GROUP_PATIENT):
            raise ValueError(f"unknown group level {self.group_level!r}")
        folds = set(self.fold_of_group.values())
        if folds != set(range(self.k)):
            raise ValueError("folds must be exactly 0..k-1, each non-empty")

    def fold_indices(self, group_keys) -> np.ndarray:
        """Per-row fold index for a sequence of group keys."""
        return np.array([self.fold_of_group[g] for g in group_keys], dtype=np.int64)


@dataclass
class RocCurve:
    points: list  # ordered (fpr, tpr, threshold)
    auc: float

    def __post_init__(self):
        if not self.points or self.points[0][:2] != (0.0, 0.0) or self.points[-1][:2] != (1.0, 1.0):
            raise ValueError("ROC points must run from (0,0) to (1,1)")
        fprs = [p[0] for p in self.points]
        tprs = [p[1] for p in self.points]
        if any(b < a for a, b in zip(fprs, fprs[1:])) or any(b < a for a, b in zip(tprs, tprs[1:])):
            raise ValueError("ROC points must be non-decreasing")
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc must lie in [0, 1]")


@dataclass
class FoldAggregate:
    pooled: RocCurve
    fold_aucs: list
    mean_auc: float
    std_auc: float
    skipped_folds: list = field(default_factory=list)


def grouped_kfold(groups, k: int, seed: int) -> FoldAssignment:
    """Shuffle distinct group keys by seed and deal them round-robin into k folds."""
    distinct = sorted(set(groups))
    if len(distinct) < k:
        raise TooFewGroups(f"need at least {k} distinct groups, got {len(distinct)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(distinct))
    fold_of_group = {distinct[j]: i % k for i, j in enumerate(order)}
    return FoldAssignment(fold_of_group=fold_of_group, k=k, group_level=GROUP_IMAGE)


def leave_one_patient_out(patients) -> FoldAssignment:
    """One fold per distinct patient, in sorted patient order."""
    distinct = sorted(set(patients))
    if len(distinct) < 2:
        raise TooFewGroups(f"need at least 2 patients, got {len(distinct)}")
    return FoldAssignment(
        fold_of_group={p: i for i, p in enumerate(distinct)},
        k=len(distinct),
        group_level=GROUP_PATIENT,
    )


def roc_curve(scores, labels) -> RocCurve:
    """ROC over descending unique score thresholds; trapezoidal AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores and labels must be matching non-empty 1-D arrays")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels == 1)
    fp = np.cumsum(sorted_labels == 0)
    # one point per unique score: keep the last index of each tie group
    last = np.flatnonzero(np.diff(sorted_scores) != 0)
    last = np.concatenate([last, [scores.size - 1]])

    points = [(0.0, 0.0, float("inf"))]
    auc = 0.0
    prev_fpr, prev_tpr = 0.0, 0.0
    for i in last:
        fpr = fp[i] / n_neg
        tpr = tp[i] / n_pos
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        points.append((float(fpr), float(tpr), float(sorted_scores[i])))
        prev_fpr, prev_tpr = fpr, tpr
    return RocCurve(points=points, auc=float(auc))


def aggregate_folds(fold_results) -> FoldAggregate:
    """Pool scores across folds and report per-fold AUCs alongside.

    ``fold_results`` is a list of (scores, labels) pairs. Folds with a single
    class are excluded from the per-fold mean and flagged in skipped_folds;
    mean/stddev use population (1/N) over the valid folds.
    """
    valid_aucs = []
    skipped = []
    all_scores, all_labels = [], []
    for i, (scores, labels) in enumerate(fold_results):
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        all_scores.append(scores)
        all_labels.append(labels)
        try:
            valid_aucs.append(roc_curve(scores, labels).auc)
        except SingleClass:
            skipped.append(i)
            valid_aucs.append(None)
    usable = [a for a in valid_aucs if a is not None]
    if not usable:
        raise NoValidFold("no fold contains both classes")
    pooled = roc_curve(np.concatenate(all_scores), np.concatenate(all_labels))
    return FoldAggregate(
        pooled=pooled,
        fold_aucs=valid_aucs,
        mean_auc=float(np.mean(usable)),
        std_auc=float(np.std(usable)),
        skipped_folds=skipped,
    )


def write_roc_csv(path, curve: RocCurve) -> None:
    lines = ["threshold,fpr,tpr"]
    for fpr, tpr, threshold in curve.points:
        lines.append(f"{threshold!r},{fpr!r},{tpr!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_summary_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
