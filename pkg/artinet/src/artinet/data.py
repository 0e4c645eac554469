"""Corpus loading and label projection.

Consumes the scanner corpus through its file interfaces only: 16-bit PNG
frames plus the manifest CSV (columns path, patient_id, sequence_id,
image_id, artifact_intervals, excluded, reason; intervals "a-b" joined by
";"). Grid-row labels come from projecting the annotated pixel-row
intervals through the center-crop + resize geometry.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import ArtinetConfig

IGNORE = -1
CLEAN = 0
ARTIFACT = 1

MANIFEST_HEADER = [
    "path", "patient_id", "sequence_id", "image_id",
    "artifact_intervals", "excluded", "reason",
]


class ImageTooSmall(ValueError):
    pass


@dataclass
class CorpusEntry:
    path: Path
    patient_id: str
    sequence_id: str
    image_id: str
    intervals: list


@dataclass
class ImageExample:
    entry: CorpusEntry
    tensor: torch.Tensor          # 3 x input_side x input_side in [-1, 1]
    row_labels: np.ndarray        # grid labels: ARTIFACT / CLEAN / IGNORE
    row_starts: np.ndarray        # projected top pixel row per grid row

    @property
    def has_artifact(self) -> bool:
        return bool((self.row_labels == ARTIFACT).any())


def read_corpus_manifest(path) -> list:
    path = Path(path)
    entries = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: unexpected manifest header {header}")
        for row in reader:
            if not row:
                continue
            if row[5].strip().lower() == "true":
                continue
            intervals = []
            if row[4]:
                for chunk in row[4].split(";"):
                    a, _, b = chunk.partition("-")
                    intervals.append((int(a), int(b)))
            entries.append(CorpusEntry(
                path=path.parent / row[0],
                patient_id=row[1], sequence_id=row[2], image_id=row[3],
                intervals=intervals,
            ))
    if not entries:
        raise ValueError(f"{path}: empty manifest")
    return entries


def load_gray_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected single-channel image")
    return arr


def crop_offsets(shape, crop_side):
    h, w = shape
    if h < crop_side or w < crop_side:
        raise ImageTooSmall(f"image {h}x{w} smaller than crop {crop_side}")
    return (h - crop_side) // 2, (w - crop_side) // 2


def preprocess(pixels: np.ndarray, cfg: ArtinetConfig) -> torch.Tensor:
    """Center crop, bilinear resize, triple the channel, scale to [-1, 1]."""
    oy, ox = crop_offsets(pixels.shape, cfg.crop_side)
    crop = pixels[oy:oy + cfg.crop_side, ox:ox + cfg.crop_side]
    top = float(crop.max()) if crop.max() > 255.0 else 255.0
    scaled = torch.from_numpy(crop / top * 2.0 - 1.0).to(torch.float32)
    resized = torch.nn.functional.interpolate(
        scaled[None, None], size=(cfg.input_side, cfg.input_side),
        mode="bilinear", align_corners=False,
    )[0, 0]
    return resized.expand(3, -1, -1).contiguous()


def grid_row_bounds(cfg: ArtinetConfig, image_height: int) -> np.ndarray:
    """Pixel-row boundaries of the grid rows: affine through crop + resize.

    The resize maps crop row r to input row r * input/crop, and grid row g
    spans input rows [g, g+1) * input/grid, so in pixel space each grid row
    covers crop_side/grid rows starting at the crop offset.
    """
    oy = (image_height - cfg.crop_side) // 2
    step = cfg.crop_side / cfg.grid
    return oy + step * np.arange(cfg.grid + 1)


def project_row_labels(entry: CorpusEntry, pixels: np.ndarray,
                       cfg: ArtinetConfig) -> tuple:
    """Label each grid row from the annotated intervals (rho rule).

    Grid rows whose pixel span falls outside the FOV rows are IGNORE.
    Returns (labels, row_starts).
    """
    bounds = grid_row_bounds(cfg, pixels.shape[0])
    fov_rows = np.flatnonzero((pixels > 0).any(axis=1))
    fov_lo = int(fov_rows[0]) if fov_rows.size else 0
    fov_hi = int(fov_rows[-1]) + 1 if fov_rows.size else 0

    labels = np.full(cfg.grid, CLEAN, dtype=np.int64)
    starts = np.floor(bounds[:-1]).astype(np.int64)
    for g in range(cfg.grid):
        lo, hi = bounds[g], bounds[g + 1]
        if hi <= fov_lo or lo >= fov_hi:
            labels[g] = IGNORE
            continue
        covered = 0.0
        for a, b in entry.intervals:
            covered += max(0.0, min(float(b), hi) - max(float(a), lo))
        if covered / (hi - lo) >= cfg.row_positive_fraction:
            labels[g] = ARTIFACT
    return labels, starts


def load_examples(manifest_path, cfg: ArtinetConfig) -> list:
    examples = []
    for entry in read_corpus_manifest(manifest_path):
        pixels = load_gray_png(entry.path)
        labels, starts = project_row_labels(entry, pixels, cfg)
        examples.append(ImageExample(
            entry=entry,
            tensor=preprocess(pixels, cfg),
            row_labels=labels,
            row_starts=starts,
        ))
    return examples
