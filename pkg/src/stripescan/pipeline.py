"""End-to-end plumbing: manifest -> slices -> features -> grouped CV.

All stages are pure functions of their inputs and configs; per-image and
per-fold work parallelizes over a thread pool capped by STRIPESCAN_THREADS
(0 or unset = one worker per CPU, 1 = serial). Results are assembled in
input order, so outputs do not depend on scheduling.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import features as feat
from .classify import LinearSvm, RandomForest, TrainConfig, undersample
from .errors import DegenerateRange, EmptyFov, NoFov, SliceTooTall, StripescanError
from .evaluation import aggregate_folds, grouped_kfold, leave_one_patient_out
from .imagecore import detect_fov, extract_slices, quantile_compress, read_image, snr_estimate
from .matrix import GROUP_IMAGE, GROUP_PATIENT, FeatureMatrix

CV_GROUPED5 = "grouped5"
CV_LOPO = "lopo"

CLASSIFIER_RF = "rf"
CLASSIFIER_SVM = "svm"

# slice overlap is bound to the feature kind unless overridden
DEFAULT_OVERLAP = {feat.KIND_HOG: 0.3, feat.KIND_CORRANGLE: 0.5}


@dataclass(frozen=True)
class PreprocessConfig:
    q_low: float = 0.02
    q_high: float = 0.98
    # mean/stddev over the FOV: dark noise-dominated frames score below 1
    snr_threshold: float = 1.0
    snr_after_compression: bool = False
    fov_intensity_floor: float = 1.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SliceConfig:
    height: int = 128
    overlap: float | None = None  # None -> per-kind default
    positive_fraction: float = 0.25

    def overlap_for(self, kind: str) -> float:
        if self.overlap is not None:
            return self.overlap
        return DEFAULT_OVERLAP[kind]

    def as_dict(self) -> dict:
        return asdict(self)


def worker_count() -> int:
    raw = os.environ.get("STRIPESCAN_THREADS", "0").strip()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def parallel_map(fn, items):
    """Map preserving input order; thread count from STRIPESCAN_THREADS."""
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class ImageOutcome:
    image_id: str
    slices: list = field(default_factory=list)
    excluded_reason: str | None = None
    failed: str | None = None


def process_entry(entry, base_dir, pre: PreprocessConfig, height: int,
                  overlap: float, positive_fraction: float) -> ImageOutcome:
    """Load one manifest entry and emit labeled slices or an exclusion reason."""
    outcome = ImageOutcome(image_id=entry.image_id)
    if entry.excluded:
        outcome.excluded_reason = entry.reason or "excluded in manifest"
        return outcome
    try:
        raw = read_image(os.path.join(base_dir, entry.path))
        mask = detect_fov(raw, pre.fov_intensity_floor)
        compressed = quantile_compress(raw, pre.q_low, pre.q_high, mask)
        snr_image = compressed if pre.snr_after_compression else raw
        if snr_estimate(snr_image, mask) < pre.snr_threshold:
            outcome.excluded_reason = "low snr"
            return outcome
        outcome.slices = extract_slices(
            compressed, mask, entry, height=height, overlap=overlap,
            positive_fraction=positive_fraction,
        )
    except (NoFov, EmptyFov, DegenerateRange) as exc:
        outcome.excluded_reason = f"{type(exc).__name__}: {exc}"
    except SliceTooTall as exc:
        outcome.failed = f"SliceTooTall: {exc}"
    except StripescanError as exc:
        outcome.failed = f"{type(exc).__name__}: {exc}"
    return outcome


@dataclass
class FeatureReport:
    n_images: int = 0
    n_slices: int = 0
    n_positive: int = 0
    excluded: list = field(default_factory=list)  # (image_id, reason)
    failures: list = field(default_factory=list)  # (image_id, message)


def build_feature_matrix(manifest, base_dir, kind: str,
                         pre: PreprocessConfig = PreprocessConfig(),
                         slices: SliceConfig = SliceConfig(),
                         hog_cfg: feat.HogConfig = feat.HogConfig(),
                         corr_cfg: feat.CorrAngleConfig = feat.CorrAngleConfig()):
    """Run exclusion -> compression -> FOV -> slices -> features over a manifest.

    Returns (FeatureMatrix, FeatureReport); per-image failures are logged in
    the report and skipped rather than aborting the run.
    """
    if kind not in (feat.KIND_HOG, feat.KIND_CORRANGLE):
        raise ValueError(f"unknown feature kind {kind!r}")
    overlap = slices.overlap_for(kind)

    def work(entry):
        outcome = process_entry(entry, base_dir, pre, slices.height, overlap,
                                slices.positive_fraction)
        if outcome.slices:
            featurizer = (feat.HogFeaturizer(hog_cfg) if kind == feat.KIND_HOG
                          else feat.CorrAngleFeaturizer(corr_cfg))
            return outcome, featurizer.transform(outcome.slices)
        return outcome, None

    report = FeatureReport()
    matrices = []
    for outcome, sub in parallel_map(work, list(manifest)):
        if outcome.excluded_reason is not None:
            report.excluded.append((outcome.image_id, outcome.excluded_reason))
            continue
        if outcome.failed is not None:
            report.failures.append((outcome.image_id, outcome.failed))
            continue
        report.n_images += 1
        report.n_slices += len(outcome.slices)
        matrices.append(sub)
    if not matrices:
        raise StripescanError("no image produced any slice")
    matrix = FeatureMatrix(
        X=np.vstack([m.X for m in matrices]),
        y=np.concatenate([m.y for m in matrices]),
        patient_ids=sum((m.patient_ids for m in matrices), []),
        sequence_ids=sum((m.sequence_ids for m in matrices), []),
        image_ids=sum((m.image_ids for m in matrices), []),
        row_starts=sum((m.row_starts for m in matrices), []),
        kind=kind,
    )
    report.n_positive = int(matrix.y.sum())
    return matrix, report


@dataclass
class FoldOutcome:
    fold: int
    model: object
    train_counts: list      # class counts after undersampling
    scores: np.ndarray
    labels: np.ndarray
    n_train: int
    n_test: int


@dataclass
class CvResult:
    assignment: object
    folds: list
    aggregate: object
    leakage: int


def make_classifier(kind: str, train: TrainConfig, seed: int):
    if kind == CLASSIFIER_RF:
        rf = train.rf
        return RandomForest(
            n_trees=rf.n_trees, max_depth=rf.max_depth, min_leaf=rf.min_leaf,
            features_per_split=rf.features_per_split, bootstrap=rf.bootstrap,
            seed=seed,
        )
    if kind == CLASSIFIER_SVM:
        svm = train.svm
        return LinearSvm(C=svm.C, epochs=svm.epochs, tolerance=svm.tolerance, seed=seed)
    raise ValueError(f"unknown classifier {kind!r}")


def run_cv(matrix: FeatureMatrix, classifier: str, cv_mode: str,
           train: TrainConfig = TrainConfig(), k: int = 5) -> CvResult:
    """Grouped cross-validation with per-fold undersampling of the training set.

    Undersampling never touches the test fold. The RF consumes raw features
    (train.rf.standardize flips that); the SVM standardizes internally. The
    train/test group intersection is asserted empty for every fold and the
    total leakage count is reported.
    """
    if cv_mode == CV_GROUPED5:
        level = GROUP_IMAGE
        assignment = grouped_kfold(matrix.group_keys(level), k=k, seed=train.seed)
    elif cv_mode == CV_LOPO:
        level = GROUP_PATIENT
        assignment = leave_one_patient_out(matrix.group_keys(level))
    else:
        raise ValueError(f"unknown cv mode {cv_mode!r}")

    keys = matrix.group_keys(level)
    fold_of_row = assignment.fold_indices(keys)
    leakage = 0
    folds = []

    def run_fold(f):
        test_idx = np.flatnonzero(fold_of_row == f)
        train_idx = np.flatnonzero(fold_of_row != f)
        overlap_groups = {keys[i] for i in train_idx} & {keys[i] for i in test_idx}
        balanced = undersample(matrix.subset(train_idx), seed=train.seed + f)
        X_train, y_train = balanced.X, balanced.y
        if classifier == CLASSIFIER_RF and train.rf.standardize:
            from .classify import Standardizer
            scaler = Standardizer().fit(X_train)
            X_train = scaler.transform(X_train)
            X_test = scaler.transform(matrix.X[test_idx])
        else:
            X_test = matrix.X[test_idx]
        model = make_classifier(classifier, train, seed=train.seed + f)
        model.fit(X_train, y_train)
        return FoldOutcome(
            fold=f,
            model=model,
            train_counts=[int((y_train == 0).sum()), int((y_train == 1).sum())],
            scores=model.predict_score(X_test),
            labels=matrix.y[test_idx].copy(),
            n_train=int(train_idx.size),
            n_test=int(test_idx.size),
        ), len(overlap_groups)

    for outcome, leaked in parallel_map(run_fold, range(assignment.k)):
        folds.append(outcome)
        leakage += leaked

    aggregate = aggregate_folds([(f.scores, f.labels) for f in folds])
    return CvResult(assignment=assignment, folds=folds, aggregate=aggregate,
                    leakage=leakage)
