import json

import numpy as np
import pytest

from stripescan.errors import BandOutOfFov
from stripescan.features import CorrAngleConfig, corr_angle
from stripescan.imagecore import (
    FovMask,
    GrayImage,
    detect_fov,
    extract_slices,
    quantile_compress,
    read_image,
    read_manifest,
)
from stripescan.synth import (
    SynthConfig,
    disc_mask,
    generate_clean,
    generate_dataset,
    inject_stretch,
    inject_stripe,
    iter_records,
    render_blob,
)

TINY = dict(width=96, height=100, band_height_range=(10, 24),
            blob_radius_range=(3.0, 6.0), oriented_length_range=(8.0, 16.0),
            stripe_shift_range=(0.2, 0.8))


class TestGenerateClean:
    def test_zero_blob_density_is_noise_in_disc(self):
        cfg = SynthConfig(seed=1, blob_density=0.0, oriented_fraction=0.0)
        img, mask = generate_clean(cfg, np.random.default_rng(1))
        outside = img.pixels[~mask.mask]
        assert np.all(outside == 0.0)
        inside = img.pixels[mask.mask]
        assert abs(inside.mean() - cfg.background_level) < 50.0
        assert inside.std() > 0.5 * cfg.background_noise

    def test_same_seed_bit_identical(self):
        cfg = SynthConfig(seed=3)
        a, _ = generate_clean(cfg, np.random.default_rng(3))
        b, _ = generate_clean(cfg, np.random.default_rng(3))
        assert np.array_equal(a.pixels, b.pixels)

    def test_detect_fov_recovers_disc_extent(self):
        cfg = SynthConfig(seed=4)
        img, mask = generate_clean(cfg, np.random.default_rng(4))
        fov = detect_fov(img, 1.0)
        diameter = min(cfg.width, cfg.height) - 4
        assert abs(fov.x_extent - diameter) <= 2
        assert abs((fov.row_max - fov.row_min + 1) - diameter) <= 2

    def test_16_bit_range(self):
        cfg = SynthConfig(seed=5)
        img, _ = generate_clean(cfg, np.random.default_rng(5))
        assert img.depth == 16
        assert img.pixels.max() <= 65535.0 and img.pixels.min() >= 0.0


def _plain_frame(seed=42):
    cfg = SynthConfig(seed=seed, oriented_fraction=0.0)
    return generate_clean(cfg, np.random.default_rng(seed))


class TestInjectStripe:
    def test_zero_shift_replicates_base_row_up_to_noise(self):
        img, mask = _plain_frame(77)
        out = inject_stripe(img, mask, (200, 260), 0.0, np.random.default_rng(5))
        sigma = 0.01 * (img.pixels.max() - img.pixels.min())
        rows = slice(201, 260)
        diff = np.abs(out.pixels[rows] - np.tile(img.pixels[200], (59, 1)))
        assert diff[mask.mask[rows]].max() < 6 * sigma

    def test_rows_outside_band_bit_identical(self):
        img, mask = _plain_frame(78)
        out = inject_stripe(img, mask, (200, 260), 1.5, np.random.default_rng(6))
        assert np.array_equal(out.pixels[:200], img.pixels[:200])
        assert np.array_equal(out.pixels[260:], img.pixels[260:])

    def test_planted_peak_moves_one_pixel_per_row(self):
        pixels = np.full((200, 200), 100.0)
        mask = FovMask.from_mask(np.ones((200, 200), dtype=bool))
        render_blob(pixels, 50.0, 60.0, 3.0, 3.0, 0.0, 20000.0)
        img = GrayImage(np.clip(pixels, 0, 65535), depth=16)
        out = inject_stripe(img, mask, (48, 120), 1.0, np.random.default_rng(1),
                            noise_fraction=0.0)
        for r in range(50, 110, 10):
            peak = int(np.argmax(out.pixels[r]))
            assert peak == 60 + (r - 48)

    def test_band_must_lie_in_fov(self):
        img, mask = _plain_frame(79)
        with pytest.raises(BandOutOfFov):
            inject_stripe(img, mask, (0, 50), 1.0, np.random.default_rng(0))


class TestInjectStretch:
    def test_identity_limit_on_smooth_gradient(self):
        # vertical ramp: 1 intensity level per row, so a 0.32-row remap
        # moves values well under 2 levels
        mask = disc_mask(200, 200)
        pixels = np.where(mask, np.arange(200, dtype=float)[:, None] + 10.0, 0.0)
        img = GrayImage(pixels, depth=16)
        fov = FovMask.from_mask(mask)
        out = inject_stretch(img, fov, (70, 134), 1.01)
        assert np.abs(out.pixels - img.pixels).max() < 2.0

    def test_identity_limit_trend_on_texture(self):
        img, mask = _plain_frame(80)
        comp = quantile_compress(img, mask=mask)
        diffs = [np.abs(inject_stretch(comp, mask, (250, 314), f).pixels - comp.pixels).max()
                 for f in (1.1, 1.01, 1.001)]
        assert diffs[0] > diffs[1] > diffs[2]

    def test_factor_two_doubles_blob_extent(self):
        base = np.full((578, 576), 100.0)
        mask = disc_mask(578, 576)
        base[~mask] = 0.0
        render_blob(base, 289.0, 288.0, 10.0, 10.0, 0.0, 5000.0)
        img = GrayImage(np.clip(base, 0, 65535), depth=16)
        fov = FovMask.from_mask(mask)
        out = inject_stretch(img, fov, (225, 353), 2.0)

        def extent(frame):
            profile = frame[:, 288] - 100.0
            return int((profile > profile.max() / 2).sum())

        ratio = extent(out.pixels) / extent(img.pixels)
        assert 1.7 <= ratio <= 2.4

    def test_row_means_follow_interp_oracle(self):
        img, mask = _plain_frame(81)
        a, b, f = 200, 320, 2.5
        out = inject_stretch(img, mask, (a, b), f)
        rows = np.arange(a, b, dtype=float)
        mid = (a + b - 1) / 2.0
        src = mid + (rows - mid) / f
        # compare over a fully-inside-FOV column window to avoid mask edges
        cols = slice(200, 380)
        src_means = img.pixels[a:b, cols].mean(axis=1)
        got_means = out.pixels[a:b, cols].mean(axis=1)
        expected = np.interp(src, rows, src_means)
        assert np.allclose(got_means, expected, rtol=1e-9, atol=1e-9)

    def test_invalid_factor(self):
        img, mask = _plain_frame(82)
        with pytest.raises(ValueError):
            inject_stretch(img, mask, (200, 260), 1.0)


class TestCorpus:
    def test_counting(self, tmp_path):
        cfg = SynthConfig(seed=2, patients=2, sequences_per_patient=2,
                          images_per_sequence=3, **TINY)
        manifest = generate_dataset(cfg, tmp_path)
        assert len(manifest) == 12
        assert len(list(tmp_path.glob("*.png"))) == 12
        assert len(list(tmp_path.glob("*.truth.json"))) == 12
        back = read_manifest(tmp_path / "manifest.csv")
        assert len(back) == 12

    def test_determinism_byte_identical_corpora(self, tmp_path):
        cfg = SynthConfig(seed=9, patients=1, sequences_per_patient=2,
                          images_per_sequence=2, **TINY)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_dataset(cfg, d1)
        generate_dataset(cfg, d2)
        files1 = sorted(p.name for p in d1.iterdir())
        assert files1 == sorted(p.name for p in d2.iterdir())
        for name in files1:
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name

    def test_artifact_fraction_matches_probability(self):
        cfg = SynthConfig(seed=12, patients=5, sequences_per_patient=10,
                          images_per_sequence=10, artifact_probability=0.4, **TINY)
        n = cfg.n_images
        assert n == 500
        hits = sum(1 for r in iter_records(cfg) if r.entry.intervals)
        sigma = (n * 0.4 * 0.6) ** 0.5
        assert abs(hits - 0.4 * n) <= 3 * sigma

    def test_intervals_round_trip_and_lie_in_fov(self, tmp_path):
        cfg = SynthConfig(seed=4, patients=2, sequences_per_patient=2,
                          images_per_sequence=3, artifact_probability=1.0, **TINY)
        generate_dataset(cfg, tmp_path)
        manifest = read_manifest(tmp_path / "manifest.csv")
        for entry in manifest:
            assert entry.intervals, "artifact probability 1.0 must annotate every image"
            truth = json.loads((tmp_path / f"{entry.image_id}.truth.json").read_text())
            assert entry.intervals == [tuple(truth["band"])]
            img = read_image(tmp_path / entry.path)
            fov = detect_fov(img, 1.0)
            a, b = entry.intervals[0]
            assert fov.row_min <= a < b <= fov.row_max + 1

    def test_stripe_bands_satisfy_corrangle_premise(self):
        # the feature's reason to exist: stripe-band slices sit below the
        # 10th percentile of clean-slice angle spread in the same corpus
        cfg = SynthConfig(seed=21, patients=3, sequences_per_patient=2,
                          images_per_sequence=4, artifact_probability=0.5,
                          stretch_ratio=0.0)
        ccfg = CorrAngleConfig()
        stripe_stds, clean_stds = [], []
        for record in iter_records(cfg):
            comp = quantile_compress(record.image, mask=record.mask)
            for rec in extract_slices(comp, record.mask, record.entry, 128, 0.5):
                std = corr_angle(rec.pixels, ccfg).std()
                if rec.artifact_row_fraction >= 0.999:
                    stripe_stds.append(std)
                elif rec.artifact_row_fraction == 0.0:
                    clean_stds.append(std)
        assert stripe_stds and len(clean_stds) > 20
        assert max(stripe_stds) < np.percentile(clean_stds, 10)

    def test_artifacts_touch_whole_rows_only(self):
        cfg = SynthConfig(seed=31, artifact_probability=1.0, stretch_ratio=0.0,
                          oriented_fraction=0.0)
        record = next(iter(iter_records(cfg)))
        clean_img, _ = generate_clean(cfg, np.random.default_rng([cfg.seed, 0]))
        changed_rows = np.flatnonzero(
            np.any(record.image.pixels != clean_img.pixels, axis=1))
        a, b = record.entry.intervals[0]
        assert changed_rows.min() >= a + 1 and changed_rows.max() < b
