"""Input validation helpers shared across modules."""

import numpy as np

from .errors import SingleClass


def as_float_array(values, name="array"):
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_2d(arr, name="array"):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    return arr


def check_matrix_labels(X, y):
    """Validate a (features, labels) pair; returns float64 X and int y in {0, 1}."""
    X = check_2d(X, "X")
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError(f"y must be 1-D with {X.shape[0]} entries, got shape {y.shape}")
    y = y.astype(np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary (0 = clean, 1 = artifact)")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    return X, y


def check_both_classes(y):
    y = np.asarray(y)
    if np.all(y == y.flat[0]):
        raise SingleClass("both classes must be present")
    return y


def check_ratio(value, name, low=0.0, high=1.0):
    value = float(value)
    if not (low <= value <= high):
        raise ValueError(f"{name} must be in [{low}, {high}], got {value}")
    return value


def check_positive_int(value, name, minimum=1):
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value
