"""Class balancing, standardization, and the two from-scratch classifiers.

Both classifiers emit continuous scores for ROC analysis: the forest votes
(fraction of trees calling artifact) and the SVM signed margin. Training is
deterministic given (data, params, seed) and models round-trip bit-exactly
through the versioned JSON format.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    IoFailure,
    NotStandardized,
    TooFewRows,
)
from .fsutil import atomic_write_text
from .matrix import FeatureMatrix
from .params import ParamsMixin
from .validation import check_both_classes, check_matrix_labels

MODEL_FORMAT = "stripescan-model"
MODEL_VERSION = 1

KIND_FOREST = "random_forest"
KIND_SVM = "linear_svm"


@dataclass(frozen=True)
class RfParams:
    n_trees: int = 200
    max_depth: int = 12
    min_leaf: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    standardize: bool = False

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("n_trees, max_depth, and min_leaf must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SvmParams:
    C: float = 1.0
    epochs: int = 50
    tolerance: float = 1e-6

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    rf: RfParams = field(default_factory=RfParams)
    svm: SvmParams = field(default_factory=SvmParams)

    def as_dict(self) -> dict:
        return {"seed": self.seed, "rf": self.rf.as_dict(), "svm": self.svm.as_dict()}


def undersample(matrix: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Subsample the majority class to the minority count, then shuffle.

    Selection is uniform without replacement and fully determined by seed;
    minority rows are kept untouched. Raises SingleClass when only one label
    is present.
    """
    check_both_classes(matrix.y)
    rng = np.random.default_rng(seed)
    idx0 = np.flatnonzero(matrix.y == 0)
    idx1 = np.flatnonzero(matrix.y == 1)
    if idx0.size > idx1.size:
        idx0 = np.sort(rng.choice(idx0, size=idx1.size, replace=False))
    elif idx1.size > idx0.size:
        idx1 = np.sort(rng.choice(idx1, size=idx0.size, replace=False))
    keep = np.concatenate([idx0, idx1])
    return matrix.subset(rng.permutation(keep))


class Standardizer(ParamsMixin):
    """Per-feature (x - mean) / stddev with training statistics (population stddev).

    Constant features are flagged and mapped to 0 instead of dividing by zero.
    """

    def __init__(self):
        self.mean_ = None
        self.std_ = None

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise TooFewRows("standardizer needs at least 2 training rows")
        self.mean_ = X.mean(axis=0)
        self.std_ = X.std(axis=0)
        return self

    def transform(self, X) -> np.ndarray:
        if self.mean_ is None:
            raise NotStandardized("standardizer has not been fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.mean_.shape[0]:
            raise DimensionMismatch(
                f"expected {self.mean_.shape[0]} features, got {X.shape[1]}"
            )
        safe = np.where(self.std_ > 0, self.std_, 1.0)
        out = (X - self.mean_) / safe
        out[:, self.std_ == 0] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean_.tolist(), "std": self.std_.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardizer":
        obj = cls()
        obj.mean_ = np.asarray(payload["mean"], dtype=np.float64)
        obj.std_ = np.asarray(payload["std"], dtype=np.float64)
        return obj


# --- random forest -----------------------------------------------------------


def _gini(n_pos, n_total):
    p = n_pos / n_total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(X, y, candidates, min_leaf):
    """Exhaustive Gini search over midpoint thresholds of the candidate features.

    Ties break to the lowest feature index, then the lowest threshold.
    Returns (feature, threshold, left_mask) or None when no boundary keeps
    both children at min_leaf.
    """
    n = y.size
    total_pos = int(y.sum())
    parent = _gini(total_pos, n)
    best = None
    for f in candidates:
        v = X[:, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = y[order]
        sizes = np.arange(1, n)
        valid = (sv[1:] > sv[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        pos_left = np.cumsum(sy)[:-1]
        nl = sizes[valid].astype(np.float64)
        pl = pos_left[valid].astype(np.float64)
        nr = n - nl
        pr = total_pos - pl
        gl = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
        gr = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
        decrease = parent - (nl * gl + nr * gr) / n
        j = int(np.argmax(decrease))  # first max -> lowest threshold
        if best is None or decrease[j] > best[0]:
            boundary = np.flatnonzero(valid)[j]
            threshold = 0.5 * (sv[boundary] + sv[boundary + 1])
            best = (float(decrease[j]), int(f), float(threshold))
    if best is None:
        return None
    _, f, threshold = best
    return f, threshold, X[:, f] <= threshold


class RandomForest(ParamsMixin):
    """Breiman-style forest of Gini trees with bootstrap and feature sampling.

    Per-tree seeds derive as seed + tree index, so trees are reproducible
    independently of build order. Score = the fraction of trees whose leaf
    majority is artifact (majority ties vote clean).
    """

    def __init__(self, n_trees=200, max_depth=12, min_leaf=2,
                 features_per_split=None, bootstrap=True, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        X, y = check_matrix_labels(X, y)
        check_both_classes(y)
        RfParams(n_trees=self.n_trees, max_depth=self.max_depth, min_leaf=self.min_leaf)
        d = X.shape[1]
        m = self.features_per_split or math.ceil(math.sqrt(d))
        m = min(m, d)
        self.n_features_ = d
        self.class_counts_ = [int((y == 0).sum()), int((y == 1).sum())]
        self.trees_ = [
            self._build_tree(X, y, np.random.default_rng(self.seed + i), m)
            for i in range(self.n_trees)
        ]
        return self

    def _build_tree(self, X, y, rng, m):
        n = X.shape[0]
        if self.bootstrap:
            sample = rng.integers(0, n, size=n)
            Xs, ys = X[sample], y[sample]
        else:
            Xs, ys = X, y

        def grow(indices, depth):
            yn = ys[indices]
            counts = [int((yn == 0).sum()), int((yn == 1).sum())]
            if (depth >= self.max_depth or indices.size < 2 * self.min_leaf
                    or counts[0] == 0 or counts[1] == 0):
                return {"counts": counts}
            cand = np.sort(rng.choice(X.shape[1], size=m, replace=False))
            split = _best_split(Xs[indices], yn, cand, self.min_leaf)
            if split is None:
                return {"counts": counts}
            f, threshold, left_mask = split
            return {
                "feature": f,
                "threshold": threshold,
                "left": grow(indices[left_mask], depth + 1),
                "right": grow(indices[~left_mask], depth + 1),
            }

        return grow(np.arange(n), 0)

    def _tree_votes(self, node, X, indices, votes):
        if "counts" in node:
            votes[indices] = 1.0 if node["counts"][1] > node["counts"][0] else 0.0
            return
        mask = X[indices, node["feature"]] <= node["threshold"]
        self._tree_votes(node["left"], X, indices[mask], votes)
        self._tree_votes(node["right"], X, indices[~mask], votes)

    def predict_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise DimensionMismatch(
                f"expected {self.n_features_} features, got shape {X.shape}"
            )
        votes = np.zeros((len(self.trees_), X.shape[0]))
        indices = np.arange(X.shape[0])
        for i, tree in enumerate(self.trees_):
            self._tree_votes(tree, X, indices, votes[i])
        return votes.mean(axis=0)

    def predict(self, X, threshold=0.5) -> np.ndarray:
        return (self.predict_score(X) >= threshold).astype(np.int64)


# --- linear SVM ----------------------------------------------------------------


class LinearSvm(ParamsMixin):
    """Hinge-loss linear SVM trained by Pegasos-style subgradient descent.

    Minimizes 0.5*||w||^2 + C * sum(hinge) with per-sample updates, step
    1/(lambda*t) where lambda = 1/(n*C), and a seeded visit order. The
    subgradient method is not a descent method, so the retained model is the
    best epoch-end iterate by objective; its objective trace is therefore
    non-increasing. Inputs are standardized internally (the standardizer is
    part of the model); constructing with standardize=False trips the
    NotStandardized guard.
    """

    def __init__(self, C=1.0, epochs=50, tolerance=1e-6, seed=0, standardize=True):
        self.C = C
        self.epochs = epochs
        self.tolerance = tolerance
        self.seed = seed
        self.standardize = standardize

    def _objective(self, X, y_signed, w, b):
        margins = y_signed * (X @ w + b)
        hinge = np.maximum(0.0, 1.0 - margins).sum()
        return 0.5 * float(w @ w) + self.C * float(hinge)

    def fit(self, X, y):
        if not self.standardize:
            raise NotStandardized("the linear SVM requires the standardization step")
        SvmParams(C=self.C, epochs=self.epochs, tolerance=self.tolerance)
        X, y = check_matrix_labels(X, y)
        check_both_classes(y)
        self.standardizer_ = Standardizer().fit(X)
        Xs = self.standardizer_.transform(X)
        y_signed = 2.0 * y - 1.0

        n, d = Xs.shape
        lam = 1.0 / (n * self.C)
        rng = np.random.default_rng(self.seed)
        w = np.zeros(d)
        b = 0.0
        t = 0
        best_obj = self._objective(Xs, y_signed, w, b)
        best_w, best_b = w.copy(), b
        raw_prev = best_obj
        self.objective_trace_ = []
        self.raw_objective_trace_ = []

        for _ in range(self.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                margin = y_signed[i] * (Xs[i] @ w + b)
                w *= 1.0 - eta * lam
                if margin < 1.0:
                    w += eta * y_signed[i] * Xs[i]
                    b += eta * y_signed[i]
            raw = self._objective(Xs, y_signed, w, b)
            if raw < best_obj:
                best_obj = raw
                best_w, best_b = w.copy(), b
            self.raw_objective_trace_.append(raw)
            self.objective_trace_.append(best_obj)
            if abs(raw_prev - raw) < self.tolerance:
                break
            raw_prev = raw

        self.coef_ = best_w
        self.intercept_ = float(best_b)
        self.n_features_ = d
        self.class_counts_ = [int((y == 0).sum()), int((y == 1).sum())]
        return self

    def predict_score(self, X) -> np.ndarray:
        if getattr(self, "standardizer_", None) is None:
            raise NotStandardized("model carries no standardizer state")
        Xs = self.standardizer_.transform(np.asarray(X, dtype=np.float64))
        return Xs @ self.coef_ + self.intercept_

    def predict(self, X, threshold=0.0) -> np.ndarray:
        return (self.predict_score(X) >= threshold).astype(np.int64)


# --- model files ---------------------------------------------------------------


def model_to_dict(model, meta: dict | None = None) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "class_counts": list(getattr(model, "class_counts_", [0, 0])),
        "meta": meta or {},
    }
    if isinstance(model, RandomForest):
        doc["kind"] = KIND_FOREST
        doc["config"] = model.get_params(deep=False)
        doc["payload"] = {"trees": model.trees_, "n_features": model.n_features_}
    elif isinstance(model, LinearSvm):
        doc["kind"] = KIND_SVM
        doc["config"] = model.get_params(deep=False)
        doc["payload"] = {
            "weights": model.coef_.tolist(),
            "bias": model.intercept_,
            "standardizer": model.standardizer_.to_dict(),
        }
    else:
        raise ValueError(f"cannot serialize model of type {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise IoFailure("not a stripescan model file (bad format/version)")
    kind = doc.get("kind")
    if kind == KIND_FOREST:
        model = RandomForest(**doc["config"])
        model.trees_ = doc["payload"]["trees"]
        model.n_features_ = int(doc["payload"]["n_features"])
    elif kind == KIND_SVM:
        model = LinearSvm(**doc["config"])
        payload = doc["payload"]
        if "standardizer" not in payload:
            raise NotStandardized("svm model payload lacks standardizer state")
        model.standardizer_ = Standardizer.from_dict(payload["standardizer"])
        model.coef_ = np.asarray(payload["weights"], dtype=np.float64)
        model.intercept_ = float(payload["bias"])
        model.n_features_ = model.coef_.shape[0]
    else:
        raise IoFailure(f"unknown model kind {kind!r}")
    model.class_counts_ = list(doc.get("class_counts", [0, 0]))
    return model, doc.get("meta", {})


def save_model(path, model, meta: dict | None = None) -> None:
    text = json.dumps(model_to_dict(model, meta), sort_keys=True, indent=2) + "\n"
    atomic_write_text(path, text)


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"cannot parse model {path}: {exc}") from exc
    return model_from_dict(doc)
