import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import compress_oracle, mean_std_oracle, quantile_oracle
from stripescan.errors import DegenerateRange, EmptyFov, IoFailure, NoFov, SliceTooTall
from stripescan.imagecore import (
    DatasetManifest,
    FovMask,
    GrayImage,
    ManifestEntry,
    artifact_row_fraction,
    detect_fov,
    dump_slices,
    extract_slices,
    normalize_intervals,
    quantile_compress,
    read_image,
    read_manifest,
    slice_starts,
    snr_estimate,
    write_image,
    write_manifest,
)
from stripescan.synth import disc_mask


def full_mask(shape):
    return FovMask.from_mask(np.ones(shape, dtype=bool))


class TestQuantileCompress:
    def test_full_range_linear_map(self):
        img = GrayImage(np.array([[0.0, 100.0, 200.0]]))
        out = quantile_compress(img, 0.0, 1.0)
        assert out.pixels.tolist() == [[0.0, 128.0, 255.0]]  # 127.5 rounds half-up
        assert out.depth == 8

    def test_constant_image_degenerate(self):
        with pytest.raises(DegenerateRange):
            quantile_compress(GrayImage(np.full((2, 2), 7.0)), 0.0, 1.0)

    def test_ramp_against_sort_based_oracle(self):
        values = np.arange(100.0)
        img = GrayImage(values.reshape(10, 10))
        out = quantile_compress(img, 0.02, 0.98)
        expected = compress_oracle(values.tolist(), 0.02, 0.98)
        assert out.pixels.ravel().tolist() == expected
        assert out.pixels.min() == 0.0 and out.pixels.max() == 255.0

    def test_quantiles_use_mask_when_given(self):
        pixels = np.array([[0.0, 0.0, 100.0, 200.0]])
        mask = FovMask(np.array([[False, False, True, True]]), 2, 0, 0)
        out = quantile_compress(GrayImage(pixels), 0.0, 1.0, mask=mask)
        # quantiles from FOV pixels {100, 200}: 100 -> 0, 200 -> 255
        assert out.pixels.tolist() == [[0.0, 0.0, 0.0, 255.0]]

    def test_bad_quantile_order_rejected(self):
        with pytest.raises(ValueError):
            quantile_compress(GrayImage(np.ones((2, 2))), 0.9, 0.1)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 10_000), min_size=2, max_size=60).filter(lambda v: len(set(v)) > 1),
           st.floats(0.0, 0.4), st.floats(0.6, 1.0))
    def test_monotonicity(self, values, q_low, q_high):
        img = GrayImage(np.array(values, dtype=float).reshape(1, -1))
        try:
            out = quantile_compress(img, q_low, q_high).pixels.ravel()
        except DegenerateRange:
            return  # both quantiles coincide; nothing to map
        order = np.argsort(values, kind="stable")
        assert np.all(np.diff(out[order]) >= 0)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 65535), min_size=3, max_size=80).filter(lambda v: len(set(v)) > 1))
    def test_idempotence_up_to_one_level(self, values):
        img = GrayImage(np.array(values, dtype=float).reshape(1, -1))
        try:
            once = quantile_compress(img, 0.02, 0.98)
            twice = quantile_compress(once, 0.0, 1.0)
        except DegenerateRange:
            return
        assert np.max(np.abs(twice.pixels - once.pixels)) <= 1.0


class TestSnrEstimate:
    def test_constant_fov_hits_sentinel(self):
        img = GrayImage(np.full((2, 3), 9.0))
        assert snr_estimate(img, full_mask((2, 3))) == float(np.finfo(np.float64).max)

    def test_two_point_population_stddev(self):
        img = GrayImage(np.array([[10.0, 20.0]]))
        assert snr_estimate(img, full_mask((1, 2))) == pytest.approx(3.0)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(5, 900, size=400)
        img = GrayImage(values.reshape(20, 20))
        mean, std = mean_std_oracle(values.tolist())
        got = snr_estimate(img, full_mask((20, 20)))
        assert got == pytest.approx(mean / std, rel=1e-12)

    def test_tiny_fov_rejected(self):
        mask = FovMask(np.array([[True, False]]), 1, 0, 0)
        with pytest.raises(EmptyFov):
            snr_estimate(GrayImage(np.ones((1, 2))), mask)


class TestDetectFov:
    def test_all_zero_raises(self):
        with pytest.raises(NoFov):
            detect_fov(GrayImage(np.zeros((4, 4))), 0.0)

    def test_synthetic_disc_extents(self):
        mask_true = disc_mask(120, 110)  # radius (110-4)/2 = 53
        img = GrayImage(np.where(mask_true, 500.0, 0.0))
        fov = detect_fov(img, 1.0)
        assert abs(fov.x_extent - 106) <= 1
        assert abs(fov.row_min - (59.5 - 53)) <= 1
        assert abs(fov.row_max - (59.5 + 53)) <= 1

    def test_row_fill_is_convex(self):
        pixels = np.zeros((3, 12))
        pixels[1, 3] = 10.0
        pixels[1, 9] = 10.0
        fov = detect_fov(GrayImage(pixels), 1.0)
        assert fov.mask[1, 3:10].all()
        assert not fov.mask[1, :3].any() and not fov.mask[1, 10:].any()

    def test_single_pixel_rows_dropped(self):
        pixels = np.zeros((4, 8))
        pixels[1, 4] = 10.0           # run of 1: dropped
        pixels[2, 2:6] = 10.0
        fov = detect_fov(GrayImage(pixels), 1.0)
        assert fov.row_min == fov.row_max == 2

    def test_invariant_to_background_offset_below_floor(self, clean_frame):
        img, _ = clean_frame
        floor = 50.0
        fov1 = detect_fov(img, floor)
        shifted = img.pixels.copy()
        background = ~fov1.mask
        shifted[background & (shifted <= floor)] += 40.0  # stays below the floor
        fov2 = detect_fov(GrayImage(shifted, depth=img.depth), floor)
        assert np.array_equal(fov1.mask, fov2.mask)

    def test_keeps_largest_contiguous_row_block(self):
        pixels = np.zeros((9, 10))
        pixels[0, 2:5] = 9.0
        pixels[3:7, 1:9] = 9.0
        fov = detect_fov(GrayImage(pixels), 1.0)
        assert (fov.row_min, fov.row_max) == (3, 6)


class TestSliceExtraction:
    def test_starts_overlap_half(self):
        assert slice_starts(0, 575, 128, 0.5) == [0, 64, 128, 192, 256, 320, 384, 448]

    def test_starts_overlap_point_three_appends_anchor(self):
        assert slice_starts(0, 575, 128, 0.3) == [0, 89, 178, 267, 356, 445, 448]

    def test_too_tall(self):
        with pytest.raises(SliceTooTall):
            slice_starts(0, 100, 128, 0.5)

    def _frame(self):
        pixels = np.zeros((300, 220))
        pixels[10:290, 20:200] = 100.0
        img = GrayImage(pixels)
        return img, detect_fov(img, 1.0)

    def test_rho_rule_example(self):
        img, mask = self._frame()
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="i",
                              intervals=[(110, 130)])
        records = extract_slices(img, mask, entry, 128, 0.5, positive_fraction=0.25)
        first = records[0]
        assert first.row_start == 10
        # 20 of 128 rows covered: fraction below 0.25 -> clean
        assert first.artifact_row_fraction == pytest.approx(20 / 128)
        assert first.label == "clean"

    def test_label_flips_at_threshold(self):
        img, mask = self._frame()
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="i",
                              intervals=[(10, 42)])  # exactly 32 rows of the first slice
        records = extract_slices(img, mask, entry, 128, 0.5, positive_fraction=0.25)
        assert records[0].artifact_row_fraction == pytest.approx(0.25)
        assert records[0].label == "artifact"

    def test_coverage_union_exact(self, clean_frame):
        img, mask = clean_frame
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="i")
        for overlap in (0.0, 0.3, 0.5, 0.77):
            records = extract_slices(img, mask, entry, 128, overlap)
            covered = np.zeros(img.height, dtype=bool)
            for rec in records:
                assert rec.row_start >= mask.row_min
                assert rec.row_end <= mask.row_max + 1
                covered[rec.row_start:rec.row_end] = True
            assert covered[mask.row_min:mask.row_max + 1].all()
            assert not covered[:mask.row_min].any()
            assert not covered[mask.row_max + 1:].any()

    def test_label_consistency_recomputable(self, clean_frame):
        img, mask = clean_frame
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="i",
                              intervals=[(100, 260), (400, 430)])
        rho = 0.25
        for rec in extract_slices(img, mask, entry, 128, 0.5, positive_fraction=rho):
            fraction = artifact_row_fraction(entry.intervals, rec.row_start, rec.row_end)
            assert rec.artifact_row_fraction == pytest.approx(fraction)
            assert rec.label == ("artifact" if fraction >= rho else "clean")

    def test_slice_width_is_x_extent_and_outside_filled_with_mean(self, clean_frame):
        img, mask = clean_frame
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="i")
        records = extract_slices(img, mask, entry, 128, 0.5)
        top = records[0]
        assert top.pixels.shape == (128, mask.x_extent)
        window = slice(top.row_start, top.row_end)
        first = mask.mask.argmax(axis=1)
        widths = mask.mask.sum(axis=1)
        widest = int(np.argmax(widths))
        cols = slice(first[widest], first[widest] + mask.x_extent)
        inside = mask.mask[window, cols]
        assert inside.shape == top.pixels.shape
        if (~inside).any():
            fill = img.pixels[window, cols][inside].mean()
            assert np.allclose(top.pixels[~inside], fill)


class TestManifest:
    def _manifest(self):
        return DatasetManifest([
            ManifestEntry(path="a.png", patient_id="p0", sequence_id="s0",
                          image_id="i0", intervals=[(5, 10), (20, 30)]),
            ManifestEntry(path="b.png", patient_id="p0", sequence_id="s0",
                          image_id="i1", excluded=True, reason="low snr"),
        ])

    def test_roundtrip(self, tmp_path):
        path = tmp_path / "manifest.csv"
        write_manifest(path, self._manifest())
        back = read_manifest(path)
        assert len(back) == 2
        assert back.entries[0].intervals == [(5, 10), (20, 30)]
        assert back.entries[1].excluded and back.entries[1].reason == "low snr"

    def test_interval_normalization_merges_overlaps(self):
        assert normalize_intervals([(20, 30), (5, 12), (10, 15)]) == [(5, 15), (20, 30)]

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            normalize_intervals([(10, 10)])

    def test_duplicate_keys_rejected(self):
        entry = ManifestEntry(path="a", patient_id="p", sequence_id="s", image_id="i")
        clone = ManifestEntry(path="b", patient_id="p", sequence_id="s", image_id="i")
        with pytest.raises(ValueError):
            DatasetManifest([entry, clone])

    def test_unreadable_manifest(self, tmp_path):
        with pytest.raises(IoFailure):
            read_manifest(tmp_path / "nope.csv")


class TestImageIo:
    @pytest.mark.parametrize("depth,suffix", [(8, ".png"), (16, ".png"),
                                              (8, ".pgm"), (16, ".pgm")])
    def test_roundtrip(self, tmp_path, depth, suffix):
        rng = np.random.default_rng(5)
        limit = 255 if depth == 8 else 65535
        pixels = rng.integers(0, limit + 1, size=(13, 17)).astype(float)
        path = tmp_path / f"img{suffix}"
        write_image(path, GrayImage(pixels, depth=depth))
        back = read_image(path)
        assert back.depth == depth
        assert np.array_equal(back.pixels, pixels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_image(tmp_path / "missing.png")

    def test_rgb_rejected(self, tmp_path):
        from PIL import Image
        path = tmp_path / "rgb.png"
        Image.new("RGB", (4, 4)).save(path)
        with pytest.raises(IoFailure):
            read_image(path)

    def test_slice_dump_names(self, tmp_path, clean_frame):
        img, mask = clean_frame
        entry = ManifestEntry(path="x", patient_id="p", sequence_id="s", image_id="img7")
        records = extract_slices(img, mask, entry, 128, 0.5)[:2]
        paths = dump_slices(records, tmp_path)
        assert [p.name for p in paths] == [f"img7_r{r.row_start}.png" for r in records]
        assert all(p.exists() for p in paths)
