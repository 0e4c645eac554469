"""Slice feature extraction: HOG moment statistics and corrAngle.

Both descriptors consume the pixel buffer of a SliceRecord. HOG summarizes
block-normalized orientation histograms into 4 moments per orientation bin;
corrAngle records, per image row, the probe angle whose displaced segment
correlates best with the row's central segment — near-constant across rows
when the slice is a repeated, shifted scan line.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import LengthMismatch, SliceTooNarrow, SliceTooShort, SliceTooSmall
from .matrix import FeatureMatrix
from .params import ParamsMixin

KIND_HOG = "hog36"
KIND_CORRANGLE = "corrangle"


@dataclass(frozen=True)
class HogConfig:
    cell: int = 32
    block: int = 64
    bins: int = 9
    block_stride: int = 32
    clip: float = 0.2

    def __post_init__(self):
        if self.cell < 1 or self.block < 1:
            raise ValueError("cell and block must be >= 1")
        if self.block % self.cell != 0:
            raise ValueError(f"block {self.block} must be a multiple of cell {self.cell}")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.block_stride < 1 or self.block_stride % self.cell != 0:
            # blocks are gathered on the cell grid, so the stride must stay on it
            raise ValueError(f"block_stride {self.block_stride} must be a positive multiple of cell")
        if not self.clip > 0:
            raise ValueError("clip must be > 0")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CorrAngleConfig:
    radius: int = 8
    segment_len: int = 64
    n_angles: int = 13
    angle_lo: float = math.pi / 8
    angle_hi: float = 7 * math.pi / 8

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.segment_len < 3:
            raise ValueError("segment_len must be >= 3")
        if self.n_angles < 2:
            raise ValueError("n_angles must be >= 2")
        if not self.angle_lo < self.angle_hi:
            raise ValueError("angle_lo must be < angle_hi")

    @property
    def angles(self) -> np.ndarray:
        return np.linspace(self.angle_lo, self.angle_hi, self.n_angles)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class FeatureVector:
    values: np.ndarray
    kind: str
    provenance: tuple  # (patient_id, sequence_id, image_id, row_start)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("values must be 1-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


def _gradients(pixels: np.ndarray):
    """Centered differences [-1, 0, 1] with replicate border, both axes."""
    p = pixels
    gx = np.empty_like(p)
    gx[:, 1:-1] = p[:, 2:] - p[:, :-2]
    gx[:, 0] = p[:, 1] - p[:, 0] if p.shape[1] > 1 else 0.0
    gx[:, -1] = p[:, -1] - p[:, -2] if p.shape[1] > 1 else 0.0
    gy = np.empty_like(p)
    gy[1:-1, :] = p[2:, :] - p[:-2, :]
    gy[0, :] = p[1, :] - p[0, :] if p.shape[0] > 1 else 0.0
    gy[-1, :] = p[-1, :] - p[-2, :] if p.shape[0] > 1 else 0.0
    return gx, gy


def hog_descriptor(pixels: np.ndarray, cfg: HogConfig = HogConfig()) -> np.ndarray:
    """Block-normalized orientation histograms (L2-Hys), concatenated row-major.

    Votes are magnitude-weighted and split linearly between the orientation
    bin whose lower edge is at or below the unsigned angle and the next bin
    (wrapping at 180 degrees), so a pure horizontal gradient lands entirely
    in bin 0. Cells tile from the top-left; partial cells are discarded.
    Within each block the layout is cell-major, bin-minor, so descriptor
    position mod ``bins`` recovers the orientation bin.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    h, w = pixels.shape
    if h < cfg.block or w < cfg.block:
        raise SliceTooSmall(f"slice {h}x{w} smaller than block {cfg.block}")

    gx, gy = _gradients(pixels)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)

    n_cy, n_cx = h // cfg.cell, w // cfg.cell
    hc, wc = n_cy * cfg.cell, n_cx * cfg.cell
    mag, ang = mag[:hc, :wc], ang[:hc, :wc]

    pos = ang * (cfg.bins / np.pi)
    i0 = np.floor(pos).astype(np.int64)
    frac = pos - i0
    i0 %= cfg.bins
    i1 = (i0 + 1) % cfg.bins

    cell_row = np.arange(hc) // cfg.cell
    cell_col = np.arange(wc) // cfg.cell
    cell_idx = cell_row[:, None] * n_cx + cell_col[None, :]
    hist = np.zeros(n_cy * n_cx * cfg.bins)
    np.add.at(hist, cell_idx * cfg.bins + i0, (1.0 - frac) * mag)
    np.add.at(hist, cell_idx * cfg.bins + i1, frac * mag)
    hist = hist.reshape(n_cy, n_cx, cfg.bins)

    bc = cfg.block // cfg.cell
    sc = cfg.block_stride // cfg.cell
    blocks = []
    for by in range(0, n_cy - bc + 1, sc):
        for bx in range(0, n_cx - bc + 1, sc):
            v = hist[by : by + bc, bx : bx + bc, :].ravel()
            norm = np.linalg.norm(v)
            if norm > 0:
                v = np.minimum(v / norm, cfg.clip)
                norm = np.linalg.norm(v)
                v = v / norm if norm > 0 else v
            blocks.append(v)
    return np.concatenate(blocks)


def hog_stats(descriptor: np.ndarray, bins: int = 9) -> np.ndarray:
    """Per-orientation-bin mean, population stddev, skewness g1, excess kurtosis g2.

    Output order is [means, stddevs, skews, kurtoses], ``bins`` values each.
    Zero-variance bins report 0 skewness and 0 kurtosis.
    """
    descriptor = np.asarray(descriptor, dtype=np.float64)
    if descriptor.ndim != 1 or descriptor.size == 0 or descriptor.size % bins != 0:
        raise LengthMismatch(
            f"descriptor length {descriptor.size} is not a positive multiple of {bins}"
        )
    series = descriptor.reshape(-1, bins)
    mean = series.mean(axis=0)
    centered = series - mean
    m2 = (centered ** 2).mean(axis=0)
    std = np.sqrt(m2)
    # variance at float-roundoff scale counts as zero, so duplicating the
    # descriptor cannot flip a constant bin into a garbage skew/kurtosis;
    # higher moments come from standardized values to dodge under/overflow
    flat = m2 <= (series ** 2).mean(axis=0) * 1e-24
    z = centered / np.where(flat, 1.0, std)
    skew = np.where(flat, 0.0, (z ** 3).mean(axis=0))
    kurt = np.where(flat, 0.0, (z ** 4).mean(axis=0) - 3.0)
    return np.concatenate([mean, np.where(flat, 0.0, std), skew, kurt])


def _bilinear_rows(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample pixels at the grid (ys[i], xs[j]) with bilinear interpolation.

    Coordinates are clamped to the image; returns shape (len(ys), len(xs)).
    """
    h, w = pixels.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = (ys - y0)[:, None]
    top = (1.0 - fx) * pixels[np.ix_(y0, x0)] + fx * pixels[np.ix_(y0, x1)]
    bottom = (1.0 - fx) * pixels[np.ix_(y1, x0)] + fx * pixels[np.ix_(y1, x1)]
    return (1.0 - fy) * top + fy * bottom


def corr_angle(pixels: np.ndarray, cfg: CorrAngleConfig = CorrAngleConfig()) -> np.ndarray:
    """Angle of maximum correlation per row, skipping R rows top and bottom.

    For each row j the reference is a centered horizontal segment; for each
    probe angle a comparative segment of the same length is sampled
    (bilinearly, clamped) centered at (L/2 + R*sin(theta), j + R + R*cos(theta)).
    The angle with the highest Pearson correlation is recorded; zero-variance
    segments correlate 0 and exact ties resolve to the smallest angle index.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    h, w = pixels.shape
    r, n = cfg.radius, cfg.segment_len
    if w < n + 2 * r:
        raise SliceTooNarrow(f"slice width {w} < segment_len + 2R = {n + 2 * r}")
    if h <= 2 * r:
        raise SliceTooShort(f"slice height {h} must exceed 2R = {2 * r}")

    rows = np.arange(r, h - r, dtype=np.float64)
    offsets = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    cx = w / 2.0

    ref = _bilinear_rows(pixels, cx + offsets, rows)
    ref_c = ref - ref.mean(axis=1, keepdims=True)
    ref_n = np.linalg.norm(ref_c, axis=1)

    angles = cfg.angles
    corr = np.zeros((cfg.n_angles, rows.size))
    for k, theta in enumerate(angles):
        comp = _bilinear_rows(
            pixels,
            cx + r * math.sin(theta) + offsets,
            rows + r + r * math.cos(theta),
        )
        comp_c = comp - comp.mean(axis=1, keepdims=True)
        comp_n = np.linalg.norm(comp_c, axis=1)
        denom = ref_n * comp_n
        dot = np.einsum("ij,ij->i", ref_c, comp_c)
        corr[k] = np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), 0.0)

    return angles[np.argmax(corr, axis=0)]


def hog36_vector(record, cfg: HogConfig = HogConfig()) -> FeatureVector:
    stats = hog_stats(hog_descriptor(record.pixels, cfg), cfg.bins)
    return FeatureVector(stats, KIND_HOG, (record.patient_id, record.sequence_id,
                                           record.image_id, record.row_start))


def corrangle_vector(record, cfg: CorrAngleConfig = CorrAngleConfig()) -> FeatureVector:
    angles = corr_angle(record.pixels, cfg)
    return FeatureVector(angles, KIND_CORRANGLE, (record.patient_id, record.sequence_id,
                                                  record.image_id, record.row_start))


def _matrix_from_records(records, vectors, kind) -> FeatureMatrix:
    from .imagecore import LABEL_ARTIFACT

    return FeatureMatrix(
        X=np.vstack([v.values for v in vectors]),
        y=np.array([1 if r.label == LABEL_ARTIFACT else 0 for r in records]),
        patient_ids=[r.patient_id for r in records],
        sequence_ids=[r.sequence_id for r in records],
        image_ids=[r.image_id for r in records],
        row_starts=[r.row_start for r in records],
        kind=kind,
    )


class HogFeaturizer(ParamsMixin):
    """Stateless transformer: SliceRecords -> 4-moment HOG FeatureMatrix."""

    def __init__(self, config: HogConfig | None = None):
        self.config = config if config is not None else HogConfig()

    def fit(self, records=None, y=None):
        return self

    def transform(self, records) -> FeatureMatrix:
        if not records:
            raise ValueError("no slices to featurize")
        vectors = [hog36_vector(r, self.config) for r in records]
        return _matrix_from_records(records, vectors, KIND_HOG)


class CorrAngleFeaturizer(ParamsMixin):
    """Stateless transformer: SliceRecords -> per-row max-correlation angles."""

    def __init__(self, config: CorrAngleConfig | None = None):
        self.config = config if config is not None else CorrAngleConfig()

    def fit(self, records=None, y=None):
        return self

    def transform(self, records) -> FeatureMatrix:
        if not records:
            raise ValueError("no slices to featurize")
        vectors = [corrangle_vector(r, self.config) for r in records]
        return _matrix_from_records(records, vectors, KIND_CORRANGLE)
