"""FeatureMatrix: the classifier interchange format.

Rows of fixed-length feature vectors paired with binary labels and the
provenance needed for grouped cross-validation. Serialized as CSV with a
sidecar ``.meta.json`` recording the feature kind and extraction config.
"""

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .fsutil import atomic_write_text
from .imagecore import LABEL_ARTIFACT, LABEL_CLEAN

GROUP_IMAGE = "image"
GROUP_PATIENT = "patient"


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    patient_ids: list
    sequence_ids: list
    image_ids: list
    row_starts: list
    kind: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        n = self.X.shape[0]
        for name in ("y", "patient_ids", "sequence_ids", "image_ids", "row_starts"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match X ({n} rows)")
        self.patient_ids = list(self.patient_ids)
        self.sequence_ids = list(self.sequence_ids)
        self.image_ids = list(self.image_ids)
        self.row_starts = [int(r) for r in self.row_starts]

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def provenance(self, i: int):
        return (self.patient_ids[i], self.sequence_ids[i],
                self.image_ids[i], self.row_starts[i])

    def group_keys(self, level: str = GROUP_IMAGE) -> list:
        if level == GROUP_IMAGE:
            return [f"{p}/{s}/{i}" for p, s, i in
                    zip(self.patient_ids, self.sequence_ids, self.image_ids)]
        if level == GROUP_PATIENT:
            return list(self.patient_ids)
        raise ValueError(f"unknown group level {level!r}")

    def subset(self, indices) -> "FeatureMatrix":
        indices = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(
            X=self.X[indices],
            y=self.y[indices],
            patient_ids=[self.patient_ids[i] for i in indices],
            sequence_ids=[self.sequence_ids[i] for i in indices],
            image_ids=[self.image_ids[i] for i in indices],
            row_starts=[self.row_starts[i] for i in indices],
            kind=self.kind,
        )


def write_feature_csv(path, matrix: FeatureMatrix, meta: dict | None = None) -> None:
    """Write the matrix CSV plus ``{path}.meta.json`` (kind and config snapshot)."""
    path = Path(path)
    header = ["patient_id", "sequence_id", "image_id", "row_start", "label"]
    header += [f"f{i}" for i in range(matrix.n_features)]
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    for i in range(len(matrix)):
        label = LABEL_ARTIFACT if matrix.y[i] == 1 else LABEL_CLEAN
        row = [matrix.patient_ids[i], matrix.sequence_ids[i],
               matrix.image_ids[i], matrix.row_starts[i], label]
        row += [repr(float(v)) for v in matrix.X[i]]
        writer.writerow(row)
    atomic_write_text(path, buffer.getvalue())
    sidecar = {"kind": matrix.kind, "n_features": matrix.n_features}
    if meta:
        sidecar.update(meta)
    meta_path = path.with_name(path.name + ".meta.json")
    atomic_write_text(meta_path, json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def read_feature_csv(path) -> FeatureMatrix:
    path = Path(path)
    meta_path = path.with_name(path.name + ".meta.json")
    kind = ""
    if meta_path.exists():
        kind = json.loads(meta_path.read_text()).get("kind", "")
    rows, labels, pats, seqs, imgs, starts = [], [], [], [], [], []
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:5] != ["patient_id", "sequence_id",
                                                "image_id", "row_start", "label"]:
                raise IoFailure(f"{path}: unexpected feature header")
            for row in reader:
                if not row:
                    continue
                pats.append(row[0])
                seqs.append(row[1])
                imgs.append(row[2])
                starts.append(int(row[3]))
                labels.append(parse_label(row[4]))
                rows.append([float(v) for v in row[5:]])
    except OSError as exc:
        raise IoFailure(f"cannot read features {path}: {exc}") from exc
    except ValueError as exc:
        raise IoFailure(f"cannot parse features {path}: {exc}") from exc
    if not rows:
        raise IoFailure(f"{path}: no feature rows")
    if len({len(r) for r in rows}) != 1:
        raise IoFailure(f"{path}: inconsistent feature column counts")
    return FeatureMatrix(
        X=np.array(rows, dtype=np.float64),
        y=np.array(labels, dtype=np.int64),
        patient_ids=pats, sequence_ids=seqs, image_ids=imgs,
        row_starts=starts, kind=kind,
    )


def read_feature_meta(path) -> dict:
    meta_path = Path(str(path) + ".meta.json")
    if not meta_path.exists():
        raise IoFailure(f"missing feature metadata {meta_path}")
    return json.loads(meta_path.read_text())


def parse_label(text) -> int:
    text = str(text).strip().lower()
    if text in (LABEL_ARTIFACT, "1", "true"):
        return 1
    if text in (LABEL_CLEAN, "0", "false"):
        return 0
    raise ValueError(f"unknown label {text!r}")
