"""Score export in the scanner pipeline's score-CSV interface.

One row per non-ignored grid row: artifact probability plus the projected
pixel row of the grid row's top edge, directly consumable by the primary
CLI's roc-plot command.
"""

import csv
from pathlib import Path

import torch

from .data import ARTIFACT, IGNORE

SCORE_HEADER = ["patient_id", "sequence_id", "image_id", "row_start", "label", "score"]


def image_row_scores(model, example) -> list:
    model.eval()
    with torch.no_grad():
        probs = model.row_probabilities(example.tensor[None])[0, :, ARTIFACT]
    rows = []
    for g, label in enumerate(example.row_labels):
        if label == IGNORE:
            continue
        rows.append({
            "patient_id": example.entry.patient_id,
            "sequence_id": example.entry.sequence_id,
            "image_id": example.entry.image_id,
            "row_start": int(example.row_starts[g]),
            "label": "artifact" if label == ARTIFACT else "clean",
            "score": float(probs[g]),
        })
    return rows


def export_scores(path, model, examples) -> int:
    path = Path(path)
    n = 0
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCORE_HEADER)
        writer.writeheader()
        for example in examples:
            for row in image_row_scores(model, example):
                writer.writerow(row)
                n += 1
    return n
