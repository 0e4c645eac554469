"""Image ingestion, range compression, FOV detection, and slice extraction.

Images are row-scanned grayscale frames with a roughly circular field of view
(FOV). Motion artifacts affect whole rows, so the unit of classification is a
fixed-height horizontal slice spanning the widest FOV row.
"""

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DegenerateRange,
    EmptyFov,
    IoFailure,
    NoFov,
    SliceTooTall,
)
from .fsutil import atomic_write_bytes, atomic_write_text

LABEL_ARTIFACT = "artifact"
LABEL_CLEAN = "clean"

MANIFEST_HEADER = [
    "path", "patient_id", "sequence_id", "image_id",
    "artifact_intervals", "excluded", "reason",
]

_FLOAT_MAX = float(np.finfo(np.float64).max)


@dataclass
class GrayImage:
    """2-D scalar raster with non-negative finite intensities.

    ``pixels`` is row-major (height x width) float64; ``depth`` records the
    source bit depth (8 or 16). Treated as immutable after construction.
    """

    pixels: np.ndarray
    depth: int = 8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {self.pixels.shape}")
        if self.depth not in (8, 16):
            raise ValueError(f"depth must be 8 or 16, got {self.depth}")
        if not np.all(np.isfinite(self.pixels)) or np.any(self.pixels < 0):
            raise ValueError("pixel intensities must be finite and >= 0")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class FovMask:
    """Boolean FOV raster plus its x-extent and bounding rows.

    Rows between row_min and row_max are guaranteed non-empty (the detected
    FOV is vertically contiguous) and each row is a single solid run.
    """

    mask: np.ndarray
    x_extent: int
    row_min: int
    row_max: int

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not (0 <= self.row_min <= self.row_max < self.mask.shape[0]):
            raise ValueError("row bounds out of range")
        if not (1 <= self.x_extent <= self.mask.shape[1]):
            raise ValueError("x_extent out of range")
        rows_any = self.mask.any(axis=1)
        if not rows_any[self.row_min : self.row_max + 1].all():
            raise ValueError("FOV has empty rows inside its bounding range")

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "FovMask":
        mask = np.asarray(mask, dtype=bool)
        rows = np.flatnonzero(mask.any(axis=1))
        if rows.size == 0:
            raise NoFov("mask is empty")
        first = mask.argmax(axis=1)
        last = mask.shape[1] - 1 - mask[:, ::-1].argmax(axis=1)
        runs = np.where(mask.any(axis=1), last - first + 1, 0)
        return cls(
            mask=mask,
            x_extent=int(runs.max()),
            row_min=int(rows[0]),
            row_max=int(rows[-1]),
        )

    @property
    def n_rows(self) -> int:
        return self.row_max - self.row_min + 1


@dataclass
class SliceRecord:
    """One fixed-height horizontal band of an image, labeled via the rho rule."""

    patient_id: str
    sequence_id: str
    image_id: str
    row_start: int
    row_end: int
    pixels: np.ndarray
    label: str
    artifact_row_fraction: float

    def __post_init__(self):
        if self.row_end - self.row_start != self.pixels.shape[0]:
            raise ValueError("row range does not match pixel buffer height")
        if self.label not in (LABEL_ARTIFACT, LABEL_CLEAN):
            raise ValueError(f"unknown label {self.label!r}")
        if not 0.0 <= self.artifact_row_fraction <= 1.0:
            raise ValueError("artifact_row_fraction must be in [0, 1]")

    @property
    def group_key(self) -> str:
        return f"{self.patient_id}/{self.sequence_id}/{self.image_id}"


@dataclass
class ManifestEntry:
    path: str
    patient_id: str
    sequence_id: str
    image_id: str
    intervals: list = field(default_factory=list)
    excluded: bool = False
    reason: str = ""

    def __post_init__(self):
        for name in ("patient_id", "sequence_id", "image_id"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        self.intervals = normalize_intervals(self.intervals)

    @property
    def key(self):
        return (self.patient_id, self.sequence_id, self.image_id)


@dataclass
class DatasetManifest:
    entries: list

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.key in seen:
                raise ValueError(f"duplicate manifest key {entry.key}")
            seen.add(entry.key)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def normalize_intervals(intervals) -> list:
    """Sort [start, end) row intervals and merge overlaps; validates bounds."""
    cleaned = []
    for start, end in intervals:
        start, end = int(start), int(end)
        if start < 0 or end <= start:
            raise ValueError(f"invalid artifact interval [{start}, {end})")
        cleaned.append((start, end))
    cleaned.sort()
    merged = []
    for start, end in cleaned:
        if merged and start < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def artifact_row_fraction(intervals, row_start: int, row_end: int) -> float:
    """Fraction of rows in [row_start, row_end) covered by artifact intervals."""
    covered = 0
    for a, b in intervals:
        covered += max(0, min(b, row_end) - max(a, row_start))
    return covered / (row_end - row_start)


# --- operations ---------------------------------------------------------------


def quantile_compress(img: GrayImage, q_low: float = 0.02, q_high: float = 0.98,
                      mask: FovMask | None = None) -> GrayImage:
    """Linearly map the [q_low, q_high] intensity quantiles onto [0, 255].

    Quantiles use sorted-order statistics with linear interpolation between
    closest ranks and are computed over FOV pixels when a mask is supplied.
    Values are clipped to [0, 255] and rounded half-up; the result is an
    8-bit-range image. Raises DegenerateRange when both quantiles coincide.
    """
    if not 0.0 <= q_low < q_high <= 1.0:
        raise ValueError(f"need 0 <= q_low < q_high <= 1, got ({q_low}, {q_high})")
    values = img.pixels[mask.mask] if mask is not None else img.pixels
    if values.size == 0:
        raise EmptyFov("mask selects no pixels")
    lo = float(np.quantile(values, q_low))
    hi = float(np.quantile(values, q_high))
    if lo == hi:
        raise DegenerateRange(f"quantiles {q_low} and {q_high} are both {lo}")
    scaled = (img.pixels - lo) / (hi - lo) * 255.0
    out = np.floor(np.clip(scaled, 0.0, 255.0) + 0.5)
    out = np.clip(out, 0.0, 255.0)  # 254.5000... can round to 255 exactly, never beyond
    return GrayImage(pixels=out, depth=8)


def snr_estimate(img: GrayImage, mask: FovMask,
                 _sentinel: float = _FLOAT_MAX) -> float:
    """Mean over population stddev of FOV intensities; sentinel on zero spread."""
    values = img.pixels[mask.mask]
    if values.size < 2:
        raise EmptyFov(f"need >= 2 FOV pixels, got {values.size}")
    std = float(values.std())
    if std == 0.0:
        return _sentinel
    return float(values.mean()) / std


def detect_fov(img: GrayImage, intensity_floor: float = 1.0) -> FovMask:
    """Detect the circular FOV by thresholding and per-row convex fill.

    Pixels strictly above ``intensity_floor`` seed the mask; each row is
    filled between its leftmost and rightmost seed, rows with a run shorter
    than 2 pixels are dropped, and the largest contiguous row block is kept
    so the result is vertically contiguous.
    """
    seed = img.pixels > intensity_floor
    if not seed.any():
        raise NoFov("no pixel above the intensity floor")
    first = seed.argmax(axis=1)
    last = seed.shape[1] - 1 - seed[:, ::-1].argmax(axis=1)
    has_row = seed.any(axis=1)
    runs = np.where(has_row, last - first + 1, 0)
    keep = runs >= 2
    if not keep.any():
        raise NoFov("no row with a run of at least 2 pixels")

    # largest contiguous block of kept rows (ties -> topmost)
    padded = np.concatenate(([False], keep, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[::2], edges[1::2]
    block = int(np.argmax(ends - starts))
    row_min, row_stop = int(starts[block]), int(ends[block])

    cols = np.arange(img.width)
    rows_sel = np.zeros(img.height, dtype=bool)
    rows_sel[row_min:row_stop] = True
    mask = (
        rows_sel[:, None]
        & (cols[None, :] >= first[:, None])
        & (cols[None, :] <= last[:, None])
    )
    return FovMask(
        mask=mask,
        x_extent=int(runs[row_min:row_stop].max()),
        row_min=row_min,
        row_max=row_stop - 1,
    )


def slice_starts(row_min: int, row_max: int, height: int, overlap: float) -> list:
    """Slice anchor rows: stride floor(height*(1-overlap)), bottom always covered."""
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    if height > row_max - row_min + 1:
        raise SliceTooTall(
            f"slice height {height} exceeds FOV extent {row_max - row_min + 1}"
        )
    stride = max(1, int(np.floor(height * (1.0 - overlap))))
    starts = list(range(row_min, row_max - height + 2, stride))
    anchor = row_max - height + 1
    if starts[-1] != anchor:
        starts.append(anchor)
    return starts


def extract_slices(img: GrayImage, mask: FovMask, entry: ManifestEntry,
                   height: int = 128, overlap: float = 0.5,
                   positive_fraction: float = 0.25) -> list:
    """Cut labeled fixed-height slices covering the FOV rows.

    Slices advance from row_min by stride floor(height*(1-overlap)); a final
    slice anchored at the bottom of the FOV is appended when needed. Each
    slice crops the x_extent-wide window centered on the widest FOV row;
    out-of-mask pixels are filled with the slice's mean in-mask intensity.
    A slice is labeled artifact when the fraction of its rows covered by
    annotated intervals reaches ``positive_fraction``.
    """
    starts = slice_starts(mask.row_min, mask.row_max, height, overlap)

    first = mask.mask.argmax(axis=1)
    last = mask.mask.shape[1] - 1 - mask.mask[:, ::-1].argmax(axis=1)
    widths = np.where(mask.mask.any(axis=1), last - first + 1, 0)
    widest = int(np.argmax(widths))
    col_lo = int(first[widest])
    col_hi = col_lo + mask.x_extent

    records = []
    for start in starts:
        end = start + height
        window = img.pixels[start:end, col_lo:col_hi]
        inside = mask.mask[start:end, col_lo:col_hi]
        fill = float(window[inside].mean()) if inside.any() else 0.0
        pixels = np.where(inside, window, fill)
        fraction = artifact_row_fraction(entry.intervals, start, end)
        records.append(SliceRecord(
            patient_id=entry.patient_id,
            sequence_id=entry.sequence_id,
            image_id=entry.image_id,
            row_start=start,
            row_end=end,
            pixels=pixels,
            label=LABEL_ARTIFACT if fraction >= positive_fraction else LABEL_CLEAN,
            artifact_row_fraction=fraction,
        ))
    return records


# --- file formats ---------------------------------------------------------------


def read_image(path) -> GrayImage:
    """Read an 8- or 16-bit single-channel PNG or PGM (binary P5)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".pgm":
            return _read_pgm(path)
        with Image.open(path) as im:
            if im.mode == "L":
                return GrayImage(np.asarray(im, dtype=np.float64), depth=8)
            if im.mode in ("I", "I;16"):
                return GrayImage(np.asarray(im, dtype=np.float64), depth=16)
            raise IoFailure(f"{path}: unsupported image mode {im.mode!r} (need single-channel)")
    except IoFailure:
        raise
    except Exception as exc:
        raise IoFailure(f"cannot read image {path}: {exc}") from exc


def write_image(path, img: GrayImage) -> None:
    """Write a GrayImage as PNG or PGM, using its recorded bit depth."""
    path = Path(path)
    limit = 255 if img.depth == 8 else 65535
    data = np.clip(np.floor(img.pixels + 0.5), 0, limit)
    arr = data.astype(np.uint8 if img.depth == 8 else np.uint16)
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{limit}\n".encode("ascii")
        raster = arr.astype(">u2" if limit > 255 else np.uint8).tobytes()
        atomic_write_bytes(path, header + raster)
    else:
        buffer = io.BytesIO()
        Image.fromarray(arr).save(buffer, format="PNG")
        atomic_write_bytes(path, buffer.getvalue())


def _read_pgm(path: Path) -> GrayImage:
    blob = path.read_bytes()
    pos, fields = 0, []
    while len(fields) < 4:
        if pos >= len(blob):
            raise IoFailure(f"{path}: truncated PGM header")
        if blob[pos : pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
            continue
        match = re.match(rb"\s*(\S+)", blob[pos:])
        if match is None:
            raise IoFailure(f"{path}: malformed PGM header")
        fields.append(match.group(1))
        pos += match.end()
    if fields[0] != b"P5":
        raise IoFailure(f"{path}: not a binary P5 PGM")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    expected = width * height * dtype.itemsize
    raster = blob[pos : pos + expected]
    if len(raster) != expected:
        raise IoFailure(f"{path}: truncated PGM raster")
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return GrayImage(pixels.astype(np.float64), depth=16 if maxval > 255 else 8)


def dump_slices(records, out_dir) -> list:
    """Debug dump: one 8-bit PNG per slice named {image_id}_r{row_start}.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        path = out_dir / f"{rec.image_id}_r{rec.row_start}.png"
        write_image(path, GrayImage(np.clip(rec.pixels, 0, 255), depth=8))
        paths.append(path)
    return paths


def _format_intervals(intervals) -> str:
    return ";".join(f"{a}-{b}" for a, b in intervals)


def _parse_intervals(text: str) -> list:
    if not text:
        return []
    out = []
    for chunk in text.split(";"):
        a, sep, b = chunk.partition("-")
        if not sep:
            raise IoFailure(f"malformed artifact interval {chunk!r}")
        out.append((int(a), int(b)))
    return out


def write_manifest(path, manifest: DatasetManifest) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(MANIFEST_HEADER)
    for e in manifest:
        writer.writerow([
            e.path, e.patient_id, e.sequence_id, e.image_id,
            _format_intervals(e.intervals),
            "true" if e.excluded else "false",
            e.reason,
        ])
    atomic_write_text(path, buffer.getvalue())


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != MANIFEST_HEADER:
                raise IoFailure(f"{path}: unexpected manifest header {header}")
            entries = []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(MANIFEST_HEADER):
                    raise IoFailure(f"{path}: bad manifest row {row}")
                entries.append(ManifestEntry(
                    path=row[0],
                    patient_id=row[1],
                    sequence_id=row[2],
                    image_id=row[3],
                    intervals=_parse_intervals(row[4]),
                    excluded=row[5].strip().lower() == "true",
                    reason=row[6],
                ))
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    except (ValueError, StopIteration) as exc:
        raise IoFailure(f"cannot parse manifest {path}: {exc}") from exc
    return DatasetManifest(entries)
