import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stripescan.imagecore import ManifestEntry, extract_slices, quantile_compress
from stripescan.synth import SynthConfig, generate_clean, inject_stripe


@pytest.fixture(scope="session")
def clean_frame():
    """One deterministic clean frame plus its mask (full default geometry)."""
    cfg = SynthConfig(seed=7)
    return generate_clean(cfg, np.random.default_rng(7))


def make_stripe_slice(shift, seed, band=(190, 400), noise_fraction=0.01):
    """A compressed 128-row slice lying fully inside a stripe band."""
    cfg = SynthConfig(seed=seed)
    rng = np.random.default_rng(seed)
    img, mask = generate_clean(cfg, rng)
    striped = inject_stripe(img, mask, band, shift, rng, noise_fraction=noise_fraction)
    comp = quantile_compress(striped, mask=mask)
    entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="i",
                          intervals=[band])
    for rec in extract_slices(comp, mask, entry, 128, 0.5):
        if rec.row_start >= band[0] and rec.row_end <= band[1]:
            return rec
    raise AssertionError("no slice fully inside the band")


def make_clean_slices(seed, n_images=2):
    """Compressed slices from clean frames (default geometry)."""
    cfg = SynthConfig(seed=seed)
    out = []
    for i in range(n_images):
        rng = np.random.default_rng(seed + i)
        img, mask = generate_clean(cfg, rng)
        comp = quantile_compress(img, mask=mask)
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s",
                              image_id=f"img{i}")
        out.extend(extract_slices(comp, mask, entry, 128, 0.5))
    return out
