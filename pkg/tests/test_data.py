import numpy as np
import pytest
from PIL import Image

from discseg import data
from discseg.tensor import ParameterError, ShapeError


def write_png(path, array_u8, mode):
    Image.fromarray(array_u8, mode=mode).save(path)


@pytest.fixture
def tiny_dataset(tmp_path):
    rng = np.random.default_rng(0)
    records = []
    for i in range(4):
        img = (rng.random((40, 40, 3)) * 255).astype(np.uint8)
        mask = (rng.random((40, 40)) < 0.2).astype(np.uint8) * 255
        ip = tmp_path / f"img{i}.png"
        mp = tmp_path / f"mask{i}.png"
        write_png(ip, img, "RGB")
        write_png(mp, mask, "L")
        records.append(data.ManifestRecord(ip, [mp], "train" if i < 3 else "test"))
    manifest = tmp_path / "manifest.txt"
    data.write_manifest(records, manifest)
    return manifest, records


class TestManifest:
    def test_round_trip(self, tiny_dataset):
        manifest, records = tiny_dataset
        loaded = data.read_manifest(manifest)
        assert [r.line() for r in loaded] == [r.line() for r in records]

    def test_missing_file_rejected(self, tmp_path):
        manifest = tmp_path / "m.txt"
        manifest.write_text("nope.png\tmask.png\ttrain\n")
        with pytest.raises(FileNotFoundError):
            data.read_manifest(manifest)

    def test_bad_split_rejected(self, tmp_path, tiny_dataset):
        _, records = tiny_dataset
        manifest = tmp_path / "m.txt"
        manifest.write_text(f"{records[0].image_path}\t{records[0].mask_paths[0]}\tvalid\n")
        with pytest.raises(ParameterError):
            data.read_manifest(manifest)


class TestPreprocess:
    def test_resize_range_and_shape(self, tmp_path):
        # 448x448 checkerboard shrinks to 224x224 with interpolated values
        board = np.indices((448, 448)).sum(axis=0) % 2 * 255
        ip = tmp_path / "board.png"
        write_png(ip, np.repeat(board[:, :, None], 3, axis=2).astype(np.uint8), "RGB")
        mp = tmp_path / "mask.png"
        write_png(mp, (board).astype(np.uint8), "L")
        rec = data.ManifestRecord(ip, [mp], "train")
        (sample,) = data.load_and_preprocess([rec], target=(224, 224))
        assert sample.image.shape == (224, 224, 3)
        assert 0.0 <= sample.image.min() and sample.image.max() <= 1.0
        assert set(np.unique(sample.mask)) <= {0.0, 1.0}

    def test_mask_thresholding(self, tmp_path):
        mask = np.array([[0, 127, 128, 255]], dtype=np.uint8)
        mp = tmp_path / "m.png"
        write_png(mp, mask, "L")
        loaded = data.load_mask(mp)
        assert loaded[0, :, 0].tolist() == [0.0, 0.0, 1.0, 1.0]

    def test_identity_resize_changes_nothing(self, tmp_path):
        rng = np.random.default_rng(1)
        img = (rng.random((224, 224, 3)) * 255).astype(np.uint8)
        ip = tmp_path / "i.png"
        write_png(ip, img, "RGB")
        mp = tmp_path / "m.png"
        write_png(mp, (img[:, :, 0] > 127).astype(np.uint8) * 255, "L")
        rec = data.ManifestRecord(ip, [mp], "train")
        (sample,) = data.load_and_preprocess([rec], target=(224, 224))
        assert np.array_equal(sample.image, img.astype(np.float32) / 255.0)

    def test_pgm_masks_accepted(self, tmp_path):
        mask = (np.eye(8) * 255).astype(np.uint8)
        mp = tmp_path / "m.pgm"
        Image.fromarray(mask, mode="L").save(mp)
        assert data.load_mask(mp)[:, :, 0].sum() == 8


class TestMergeAnnotations:
    def test_single_mask_unchanged(self):
        m = (np.random.default_rng(2).random((6, 6, 1)) < 0.5).astype(np.float32)
        assert np.array_equal(data.merge_annotations([m]), m)

    def test_two_identical(self):
        m = np.ones((3, 3, 1), dtype=np.float32)
        assert np.array_equal(data.merge_annotations([m, m]), m)

    def test_half_tie_counts_as_disc(self):
        a = np.zeros((1, 2, 1), dtype=np.float32)
        b = np.zeros((1, 2, 1), dtype=np.float32)
        a[0, 0, 0] = 1.0
        merged = data.merge_annotations([a, b])
        assert merged[0, 0, 0] == 1.0 and merged[0, 1, 0] == 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        masks = [(rng.random((5, 5, 1)) < 0.5).astype(np.float32) for _ in range(3)]
        out1 = data.merge_annotations(masks)
        out2 = data.merge_annotations(masks[::-1])
        assert np.array_equal(out1, out2)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            data.merge_annotations([np.zeros((2, 2, 1), np.float32),
                                    np.zeros((3, 3, 1), np.float32)])


class TestSplit:
    def test_fraction_arithmetic(self):
        train, val, test = data.split_dataset(list(range(100)), seed=5)
        assert (len(train), len(val), len(test)) == (68, 7, 25)

    def test_deterministic(self):
        a = data.split_dataset(list(range(40)), seed=9)
        b = data.split_dataset(list(range(40)), seed=9)
        assert a == b
        c = data.split_dataset(list(range(40)), seed=10)
        assert a != c

    def test_partition_is_exhaustive_and_disjoint(self):
        records = list(range(53))
        train, val, test = data.split_dataset(records, seed=1)
        combined = sorted(train + val + test)
        assert combined == records

    def test_too_few_records(self):
        with pytest.raises(ParameterError):
            data.split_dataset([1, 2], seed=0)


def disc_sample(size=48, radius=10):
    ys, xs = np.mgrid[0:size, 0:size]
    mask = ((xs - size / 2) ** 2 + (ys - size / 2) ** 2 <= radius ** 2)
    image = np.where(mask[..., None], 0.9, 0.1).astype(np.float32)
    image = np.repeat(image, 3, axis=2)
    return data.Sample(image, mask.astype(np.float32)[:, :, None], source_id="disc")


class TestAugment:
    def test_hflip_twice_is_identity_bitwise(self):
        s = disc_sample()
        once = data.apply_affine(s, hflip=True)
        twice = data.apply_affine(once, hflip=True)
        assert twice.image.tobytes() == s.image.tobytes()
        assert twice.mask.tobytes() == s.mask.tobytes()

    def test_zero_rotation_is_identity(self):
        s = disc_sample()
        out = data.apply_affine(s, angle=0.0)
        assert np.array_equal(out.image, s.image)
        assert np.array_equal(out.mask, s.mask)

    def test_rotation_preserves_disc_area(self):
        s = disc_sample()
        for angle in (90.0, 37.0, 180.0):
            out = data.apply_affine(s, angle=angle)
            before = s.mask.sum()
            after = out.mask.sum()
            assert abs(after - before) / before < 0.02, angle

    def test_shift_moves_and_zero_fills(self):
        s = disc_sample()
        out = data.apply_affine(s, shift_x=0.25)
        com_before = np.argwhere(s.mask[:, :, 0]).mean(axis=0)
        com_after = np.argwhere(out.mask[:, :, 0]).mean(axis=0)
        assert com_after[1] - com_before[1] == pytest.approx(0.25 * 48, abs=1.0)
        assert out.image[:, 0, :].max() == 0.0  # vacated margin is zero

    def test_mask_stays_binary_and_shapes_fixed(self):
        s = disc_sample()
        cfg = data.AugmentationConfig(probability=1.0, seed=4)
        for i in range(10):
            out = data.augment(s, cfg, data.augment_rng(cfg, i, epoch=0))
            assert out.image.shape == s.image.shape
            assert out.mask.shape == s.mask.shape
            assert set(np.unique(out.mask)) <= {0.0, 1.0}
            assert np.all(np.isfinite(out.image))

    def test_augment_deterministic_per_stream(self):
        s = disc_sample()
        cfg = data.AugmentationConfig(seed=11)
        a = data.augment(s, cfg, data.augment_rng(cfg, 3, epoch=2))
        b = data.augment(s, cfg, data.augment_rng(cfg, 3, epoch=2))
        assert a.image.tobytes() == b.image.tobytes()

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            data.AugmentationConfig(probability=1.5)
        with pytest.raises(ParameterError):
            data.AugmentationConfig(shift_fraction=0.6)


class TestSynthetic:
    def test_mask_fraction_within_bounds(self):
        for s in data.generate_synthetic(12, 64, seed=0):
            frac = float(s.mask.mean())
            assert 0.02 <= frac <= 0.10

    def test_deterministic_bytes(self):
        a = data.generate_synthetic(3, 64, seed=5)
        b = data.generate_synthetic(3, 64, seed=5)
        for sa, sb in zip(a, b):
            assert sa.image.tobytes() == sb.image.tobytes()
            assert sa.mask.tobytes() == sb.mask.tobytes()

    def test_disc_region_stays_bright(self):
        # nothing (vessels, distractors) may overwrite the target disc
        for s in data.generate_synthetic(8, 64, seed=1):
            disc = s.mask[:, :, 0] > 0
            assert s.image[disc, 0].min() > 0.4

    def test_image_range_and_divisibility(self):
        (s,) = data.generate_synthetic(1, 96, seed=2)
        assert s.image.shape == (96, 96, 3)
        assert 0.0 <= s.image.min() and s.image.max() <= 1.0

    def test_bad_size_rejected(self):
        with pytest.raises(ShapeError):
            data.generate_synthetic(1, 50, seed=0)

    def test_save_dataset_round_trip(self, tmp_path):
        samples = data.generate_synthetic(8, 64, seed=3)
        manifest = data.save_dataset(samples, tmp_path, test_fraction=0.25)
        records = data.read_manifest(manifest)
        assert len(records) == 8
        assert sum(r.split == "test" for r in records) == 2
        loaded = data.load_and_preprocess(records, target=(64, 64))
        # PNG round trip preserves the binary masks exactly
        for orig, back in zip(samples, loaded):
            assert np.array_equal(orig.mask, back.mask)


class TestBatchIter:
    def test_shapes_and_coverage(self):
        samples = data.generate_synthetic(5, 32, seed=4)
        batches = list(data.batch_iter(samples, 2))
        assert [b[0].shape[0] for b in batches] == [2, 2, 1]
        assert batches[0][0].shape[1:] == (32, 32, 3)
        assert batches[0][1].shape[1:] == (32, 32, 1)

    def test_shuffle_is_seeded(self):
        samples = data.generate_synthetic(6, 32, seed=5)
        from discseg.tensor import rng_for
        a = [b[0].tobytes() for b in data.batch_iter(samples, 2, rng_for(1))]
        b = [b[0].tobytes() for b in data.batch_iter(samples, 2, rng_for(1))]
        assert a == b
