"""Seeded generator of CLE-like frames with ground-truth motion artifacts.

Frames are elliptical-blob texture inside a centered disc FOV, written as
16-bit PNG. Stripe artifacts literally replicate one scan row with a
per-row horizontal shift (the mechanism that produces streaks in real
frames); stretch artifacts resample the central portion of a band to full
band height. Both touch whole rows, only inside the FOV, so the disc
outline survives injection. Identical configs produce byte-identical
corpora.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BandOutOfFov, IoFailure
from .fsutil import atomic_write_text
from .imagecore import (
    DatasetManifest,
    FovMask,
    GrayImage,
    ManifestEntry,
    write_image,
    write_manifest,
)

KIND_STRIPE = "stripe"
KIND_STRETCH = "stretch"


@dataclass(frozen=True)
class SynthConfig:
    width: int = 576
    height: int = 578
    seed: int = 0
    patients: int = 2
    sequences_per_patient: int = 2
    images_per_sequence: int = 3
    artifact_probability: float = 0.5
    stretch_ratio: float = 0.25
    # Shift is drawn uniformly from this range (px/row, negative = leftward),
    # then capped so the cumulative drift never drags the base row's edge
    # through the frame center (edge-clamped replication would degenerate to
    # a constant there). The default stays in the rightward regime the
    # correlation probe can match at zero lag; leftward or near-zero drifts
    # are legal but give the angle sequence no stable lock.
    stripe_shift_range: tuple = (0.3, 1.8)
    # 0 = free band placement; >0 snaps band start and height to this row
    # grid (anchored at the FOV top) so fixed-stride slices are either fully
    # striped or barely touched - used by verification corpora.
    band_grid: int = 0
    stretch_factor_range: tuple = (2.0, 6.0)
    band_height_range: tuple = (64, 256)
    blob_density: float = 4e-4
    blob_radius_range: tuple = (8.0, 20.0)
    blob_aspect_range: tuple = (1.5, 4.0)
    blob_amplitude_range: tuple = (6000.0, 22000.0)
    # A fraction of frames get strand-like texture: thin curved ridges whose
    # direction is drawn from the same slope family as stripe drifts. Their
    # local gradient statistics mimic streaks (hard for orientation
    # histograms), but the curvature changes the chord slope within a few
    # rows, so rows are nothing like shifted replicas (easy to reject for
    # the correlation probe).
    oriented_fraction: float = 0.35
    oriented_length_range: tuple = (30.0, 70.0)
    oriented_width_range: tuple = (1.8, 3.5)
    oriented_curve_radius_range: tuple = (30.0, 120.0)
    background_level: float = 8000.0
    background_noise: float = 900.0
    stripe_noise_fraction: float = 0.01

    def __post_init__(self):
        if min(self.patients, self.sequences_per_patient, self.images_per_sequence) < 1:
            raise ValueError("corpus counts must be >= 1")
        if not 0.0 <= self.artifact_probability <= 1.0:
            raise ValueError("artifact_probability must be in [0, 1]")
        if not 0.0 <= self.stretch_ratio <= 1.0:
            raise ValueError("stretch_ratio must be in [0, 1]")
        if not self.stripe_shift_range[0] <= self.stripe_shift_range[1]:
            raise ValueError("stripe shift range is inverted")
        if min(self.width, self.height) < 16:
            raise ValueError("image too small")

    @property
    def n_images(self) -> int:
        return self.patients * self.sequences_per_patient * self.images_per_sequence

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthRecord:
    image: GrayImage
    mask: FovMask
    entry: ManifestEntry
    truth: dict = field(default_factory=dict)


def disc_mask(height: int, width: int) -> np.ndarray:
    radius = (min(width, height) - 4) / 2.0
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    yy, xx = np.mgrid[0:height, 0:width]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2


def render_blob(pixels: np.ndarray, cy: float, cx: float, sigma_major: float,
                sigma_minor: float, angle: float, amplitude: float) -> None:
    """Add one elliptical Gaussian, in place, over its 3.5-sigma bounding box."""
    reach = 3.5 * sigma_major
    y0 = max(0, int(math.floor(cy - reach)))
    y1 = min(pixels.shape[0], int(math.ceil(cy + reach)) + 1)
    x0 = max(0, int(math.floor(cx - reach)))
    x1 = min(pixels.shape[1], int(math.ceil(cx + reach)) + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dy, dx = yy - cy, xx - cx
    u = dx * math.cos(angle) + dy * math.sin(angle)
    v = -dx * math.sin(angle) + dy * math.cos(angle)
    pixels[y0:y1, x0:x1] += amplitude * np.exp(
        -0.5 * ((u / sigma_major) ** 2 + (v / sigma_minor) ** 2)
    )


def render_stroke(pixels: np.ndarray, cy: float, cx: float, direction: float,
                  length: float, width: float, curvature: float,
                  amplitude: float) -> None:
    """Add one curved ridge, in place: round stamps along a circular arc."""
    spacing = max(0.8 * width, 0.8)
    n_steps = max(2, int(round(length / spacing)))
    stamp = amplitude * spacing / (width * math.sqrt(2.0 * math.pi))
    # walk back half the arc so (cy, cx) is the stroke center
    t = direction - 0.5 * length * curvature
    y = cy - 0.5 * length * math.sin(t)
    x = cx - 0.5 * length * math.cos(t)
    for _ in range(n_steps + 1):
        render_blob(pixels, y, x, width, width, 0.0, stamp)
        x += spacing * math.cos(t)
        y += spacing * math.sin(t)
        t += spacing * curvature


def generate_clean(cfg: SynthConfig, rng: np.random.Generator):
    """Blob texture plus background noise inside a centered disc FOV.

    Returns (GrayImage, FovMask); intensities land in the 16-bit range and
    everything outside the disc is zero.
    """
    mask = disc_mask(cfg.height, cfg.width)
    radius = (min(cfg.width, cfg.height) - 4) / 2.0
    cy, cx = (cfg.height - 1) / 2.0, (cfg.width - 1) / 2.0

    pixels = np.zeros((cfg.height, cfg.width))
    pixels[mask] = cfg.background_level + rng.normal(
        0.0, cfg.background_noise, size=int(mask.sum())
    )

    oriented = rng.uniform() < cfg.oriented_fraction
    # strand travel direction follows a streak of slope s (x drift per row),
    # so its edge gradients land in the orientation bins a stripe band loads
    strand_dir = math.atan2(1.0, rng.uniform(*cfg.stripe_shift_range))

    n_blobs = int(round(cfg.blob_density * math.pi * radius * radius))
    for _ in range(n_blobs):
        rad = radius * math.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2.0 * math.pi)
        by, bx = cy + rad * math.sin(ang), cx + rad * math.cos(ang)
        if oriented:
            render_stroke(
                pixels, by, bx,
                direction=strand_dir + rng.normal(0.0, 0.1),
                length=rng.uniform(*cfg.oriented_length_range),
                width=rng.uniform(*cfg.oriented_width_range),
                curvature=rng.choice([-1.0, 1.0]) / rng.uniform(*cfg.oriented_curve_radius_range),
                amplitude=rng.uniform(*cfg.blob_amplitude_range),
            )
        else:
            sigma_major = rng.uniform(*cfg.blob_radius_range)
            sigma_minor = sigma_major / rng.uniform(*cfg.blob_aspect_range)
            render_blob(pixels, by, bx, sigma_major, sigma_minor,
                        rng.uniform(0.0, math.pi),
                        rng.uniform(*cfg.blob_amplitude_range))

    pixels = np.clip(pixels, 0.0, 65535.0)
    pixels[~mask] = 0.0
    return GrayImage(pixels, depth=16), FovMask.from_mask(mask)


def _check_band(mask: FovMask, band) -> tuple:
    a, b = int(band[0]), int(band[1])
    if not (mask.row_min <= a < b <= mask.row_max + 1):
        raise BandOutOfFov(f"band [{a}, {b}) outside FOV rows "
                           f"[{mask.row_min}, {mask.row_max + 1})")
    return a, b


def inject_stripe(img: GrayImage, mask: FovMask, band, shift: float,
                  rng: np.random.Generator, noise_fraction: float = 0.01) -> GrayImage:
    """Replace band rows with row a translated by (r - a) * shift pixels.

    Translation uses 1-D linear resampling with edge clamping; each
    replicated row gets Gaussian noise with sigma = noise_fraction times the
    image's dynamic range. Only in-FOV pixels change, so the disc outline
    is preserved; rows outside the band are untouched.
    """
    a, b = _check_band(mask, band)
    pixels = img.pixels.copy()
    base = img.pixels[a]
    width = img.width
    xs = np.arange(width, dtype=np.float64)
    sigma = noise_fraction * float(img.pixels.max() - img.pixels.min())
    top = 255.0 if img.depth == 8 else 65535.0
    for r in range(a + 1, b):
        src = np.clip(xs - (r - a) * shift, 0.0, width - 1.0)
        x0 = np.floor(src).astype(np.int64)
        x1 = np.minimum(x0 + 1, width - 1)
        fx = src - x0
        row = (1.0 - fx) * base[x0] + fx * base[x1]
        row = row + rng.normal(0.0, sigma, size=width)
        inside = mask.mask[r]
        pixels[r, inside] = np.clip(row[inside], 0.0, top)
    return GrayImage(pixels, depth=img.depth)


def inject_stretch(img: GrayImage, mask: FovMask, band, factor: float,
                   rng: np.random.Generator | None = None) -> GrayImage:
    """Resample the central 1/factor of the band to full band height.

    Emulates slow-scan elongation: output row i reads the source band at
    mid + (i - mid)/factor with vertical linear interpolation, so the band
    approaches identity as factor -> 1. In-FOV pixels only.
    """
    if not factor > 1.0:
        raise ValueError(f"stretch factor must be > 1, got {factor}")
    a, b = _check_band(mask, band)
    pixels = img.pixels.copy()
    mid = (a + b - 1) / 2.0
    rows_out = np.arange(a, b, dtype=np.float64)
    src = mid + (rows_out - mid) / factor
    y0 = np.floor(src).astype(np.int64)
    y1 = np.minimum(y0 + 1, b - 1)
    fy = (src - y0)[:, None]
    stretched = (1.0 - fy) * img.pixels[y0] + fy * img.pixels[y1]
    top = 255.0 if img.depth == 8 else 65535.0
    for i, r in enumerate(range(a, b)):
        inside = mask.mask[r]
        pixels[r, inside] = np.clip(stretched[i, inside], 0.0, top)
    return GrayImage(pixels, depth=img.depth)


def _row_run(mask: FovMask, row: int) -> tuple:
    cols = np.flatnonzero(mask.mask[row])
    return int(cols[0]), int(cols[-1])


def _sample_band(cfg: SynthConfig, mask: FovMask, rng: np.random.Generator) -> tuple:
    """Pick a band inside the FOV, away from the narrow disc-edge rows."""
    lo, hi = cfg.band_height_range
    margin = int(round(0.12 * mask.n_rows))
    band_h = min(int(rng.integers(lo, hi + 1)), mask.n_rows - 2 * margin, mask.n_rows)
    if cfg.band_grid > 0:
        band_h = max(cfg.band_grid, (band_h // cfg.band_grid) * cfg.band_grid)
    a_lo = mask.row_min + margin
    a_hi = mask.row_max + 1 - band_h - margin
    if a_hi < a_lo:
        a_lo, a_hi = mask.row_min, mask.row_max + 1 - band_h
    a = int(rng.integers(a_lo, a_hi + 1))
    if cfg.band_grid > 0:
        a = mask.row_min + cfg.band_grid * ((a - mask.row_min) // cfg.band_grid)
    return a, a + band_h


def _cap_shift(shift: float, mask: FovMask, band: tuple) -> float:
    """Keep the cumulative drift from pulling the base row's edge past center."""
    a, b = band
    first, last = _row_run(mask, a)
    widest = mask.row_min + int(np.argmax(mask.mask[mask.row_min:mask.row_max + 1].sum(axis=1)))
    w_first, w_last = _row_run(mask, widest)
    center = (w_first + w_last) / 2.0
    travel = max(1, b - 1 - a)
    cap_right = max(0.05, 0.9 * (center - 60.0 - first) / travel)
    cap_left = max(0.05, 0.9 * (last - center - 60.0) / travel)
    return float(np.clip(shift, -cap_left, cap_right))


def _make_record(cfg: SynthConfig, index: int) -> SynthRecord:
    rng = np.random.default_rng([cfg.seed, index])
    per_seq = cfg.images_per_sequence
    per_pat = cfg.sequences_per_patient * per_seq
    p, s, i = index // per_pat, (index // per_seq) % cfg.sequences_per_patient, index % per_seq
    image_id = f"p{p:02d}_s{s:02d}_i{i:03d}"

    img, mask = generate_clean(cfg, rng)
    intervals = []
    truth = {"kind": "clean"}
    if rng.uniform() < cfg.artifact_probability:
        band = _sample_band(cfg, mask, rng)
        if rng.uniform() < cfg.stretch_ratio:
            factor = rng.uniform(*cfg.stretch_factor_range)
            img = inject_stretch(img, mask, band, factor, rng)
            truth = {"kind": KIND_STRETCH, "factor": factor}
        else:
            shift = _cap_shift(rng.uniform(*cfg.stripe_shift_range), mask, band)
            img = inject_stripe(img, mask, band, shift, rng,
                                noise_fraction=cfg.stripe_noise_fraction)
            truth = {"kind": KIND_STRIPE, "shift": shift}
        intervals = [band]
        truth["band"] = [int(band[0]), int(band[1])]

    entry = ManifestEntry(
        path=f"{image_id}.png",
        patient_id=f"p{p:02d}",
        sequence_id=f"p{p:02d}_s{s:02d}",
        image_id=image_id,
        intervals=intervals,
    )
    return SynthRecord(image=img, mask=mask, entry=entry, truth=truth)


def iter_records(cfg: SynthConfig):
    """Yield SynthRecords lazily; per-image rngs derive from (seed, index)."""
    for index in range(cfg.n_images):
        yield _make_record(cfg, index)


def generate_dataset(cfg: SynthConfig, out_dir) -> DatasetManifest:
    """Write the corpus: 16-bit PNGs, truth sidecars, and the manifest CSV."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc
    entries = []
    for record in iter_records(cfg):
        write_image(out_dir / record.entry.path, record.image)
        truth_path = out_dir / f"{record.entry.image_id}.truth.json"
        atomic_write_text(truth_path, json.dumps(record.truth, sort_keys=True, indent=2) + "\n")
        entries.append(record.entry)
    manifest = DatasetManifest(entries)
    write_manifest(out_dir / "manifest.csv", manifest)
    return manifest
