"""Leave-one-patient-out training: every image is scored by a model that
never saw its patient, yielding one pooled score CSV for ROC evaluation."""

import csv
import dataclasses
from pathlib import Path

from .config import ArtinetConfig
from .data import load_examples
from .export import SCORE_HEADER, image_row_scores
from .train import train


def run_lopo(manifest_path, cfg: ArtinetConfig, out_csv) -> int:
    examples = load_examples(manifest_path, cfg)
    patients = sorted({ex.entry.patient_id for ex in examples})
    if len(patients) < 2:
        raise ValueError("leave-one-patient-out needs at least 2 patients")

    rows = []
    for fold, patient in enumerate(patients):
        train_examples = [ex for ex in examples if ex.entry.patient_id != patient]
        held_out = [ex for ex in examples if ex.entry.patient_id == patient]
        fold_cfg = dataclasses.replace(cfg, seed=cfg.seed + fold)
        result = train(train_examples, fold_cfg)
        for ex in held_out:
            rows.extend(image_row_scores(result.model, ex))

    with Path(out_csv).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCORE_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)
