"""Dataset ingestion, preprocessing, annotator-mask merging, splits,
augmentation, and the synthetic fundus-like generator for desk-scale runs.

Manifest format, one record per line:

    image-path<TAB>mask-path[;mask-path...]<TAB>train|test

Images load as [H,W,3] float32 in [0,1]; masks as [H,W,1] strictly {0,1}.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import resample
from .tensor import ParameterError, ShapeError, Tensor, rng_for

MASK_THRESHOLD = 127  # of 255; strictly greater counts as disc


@dataclass
class Sample:
    image: Tensor               # [H,W,3] float32 in [0,1]
    mask: Tensor                # [H,W,1] float32 in {0,1}
    source_id: str = ""
    annotator_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.image.shape[:2] != self.mask.shape[:2]:
            raise ShapeError(
                f"image {self.image.shape} and mask {self.mask.shape} spatial dims differ")


@dataclass
class ManifestRecord:
    image_path: Path
    mask_paths: list[Path]
    split: str  # train | test

    def line(self) -> str:
        masks = ";".join(str(p) for p in self.mask_paths)
        return f"{self.image_path}\t{masks}\t{self.split}"


def read_manifest(path) -> list[ManifestRecord]:
    path = Path(path)
    records = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParameterError(f"{path}:{lineno}: expected 3 tab-separated fields")
        image_path, masks, split = parts
        if split not in ("train", "test"):
            raise ParameterError(f"{path}:{lineno}: split must be train or test, got '{split}'")
        rec = ManifestRecord(Path(image_path), [Path(m) for m in masks.split(";") if m], split)
        if not rec.image_path.exists():
            raise FileNotFoundError(f"{path}:{lineno}: missing image {rec.image_path}")
        for m in rec.mask_paths:
            if not m.exists():
                raise FileNotFoundError(f"{path}:{lineno}: missing mask {m}")
        records.append(rec)
    return records


def write_manifest(records: list[ManifestRecord], path) -> None:
    Path(path).write_text("".join(r.line() + "\n" for r in records))


def load_image(path) -> Tensor:
    """Read an image file as [H,W,3] float32 scaled by 1/255."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ParameterError(f"zero-dimension image {path}")
    return arr / 255.0


def load_mask(path) -> Tensor:
    """Read a mask file (PNG or PGM) as binary [H,W,1] float32."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    binary = (arr > MASK_THRESHOLD).astype(np.float32)
    return binary[:, :, None]


def merge_annotations(masks: list[Tensor]) -> Tensor:
    """Average multiple binary tracings; ties at exactly 0.5 count as disc."""
    if not masks:
        raise ParameterError("merge_annotations needs at least one mask")
    first = masks[0]
    for m in masks[1:]:
        if m.shape != first.shape:
            raise ShapeError(f"mask shapes differ: {first.shape} vs {m.shape}")
    mean = np.mean(np.stack(masks), axis=0)
    return (mean >= 0.5).astype(np.float32)


def load_and_preprocess(records: list[ManifestRecord],
                        target: tuple[int, int] = (224, 224)) -> list[Sample]:
    """Resize images bilinearly, merge and nearest-resize masks, binarize."""
    samples = []
    for rec in records:
        image = resample.resize(load_image(rec.image_path), target, order="bilinear")
        np.clip(image, 0.0, 1.0, out=image)
        # annotator masks are merged at native resolution, before resizing
        merged = merge_annotations([load_mask(p) for p in rec.mask_paths])
        mask = resample.resize(merged, target, order="nearest")
        mask = (mask >= 0.5).astype(np.float32)
        samples.append(Sample(image, mask, source_id=str(rec.image_path),
                              annotator_ids=tuple(str(p) for p in rec.mask_paths)))
    return samples


def split_dataset(records: list, train_fraction: float = 0.75,
                  val_fraction_of_train: float = 0.10, seed: int = 0):
    """Deterministic disjoint (train, val, test) partition of records."""
    if not 0 < train_fraction < 1 or not 0 < val_fraction_of_train < 1:
        raise ParameterError("fractions must lie in (0, 1)")
    n = len(records)
    n_train_pool = int(n * train_fraction)
    n_val = int(n_train_pool * val_fraction_of_train)
    n_train = n_train_pool - n_val
    n_test = n - n_train_pool
    if min(n_train, n_val, n_test) < 1:
        raise ParameterError(f"{n} records are too few to populate train/val/test")
    perm = rng_for(seed).permutation(n)
    pool = perm[:n_train_pool]
    return ([records[i] for i in pool[n_val:]],
            [records[i] for i in pool[:n_val]],
            [records[i] for i in perm[n_train_pool:]])


def carve_validation(records: list, val_fraction: float = 0.10, seed: int = 0):
    """Hold out a validation subset from an already-tagged training split."""
    n = len(records)
    n_val = max(1, int(n * val_fraction))
    if n_val >= n:
        raise ParameterError(f"cannot carve {n_val} validation records out of {n}")
    perm = rng_for(seed).permutation(n)
    return [records[i] for i in perm[n_val:]], [records[i] for i in perm[:n_val]]


@dataclass
class AugmentationConfig:
    probability: float = 0.5          # chance of applying each transform
    shift_fraction: float = 0.10      # max |shift| as a fraction of each dim
    rotation_range: tuple[float, float] = (0.0, 360.0)
    enable_hflip: bool = True
    enable_vflip: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ParameterError(f"probability must be in [0,1], got {self.probability}")
        if not 0 <= self.shift_fraction <= 0.5:
            raise ParameterError(f"shift fraction must be in [0,0.5], got {self.shift_fraction}")


def apply_affine(sample: Sample, angle: float = 0.0, shift_x: float = 0.0,
                 shift_y: float = 0.0, hflip: bool = False, vflip: bool = False) -> Sample:
    """One shared affine: bilinear for the image, nearest for the mask,
    zero fill outside bounds, mask re-binarized."""
    h, w = sample.image.shape[:2]
    mats = []
    if hflip:
        mats.append(resample.flip_h(w))
    if vflip:
        mats.append(resample.flip_v(h))
    if angle:
        mats.append(resample.rotation_about((w - 1) / 2.0, (h - 1) / 2.0, angle))
    if shift_x or shift_y:
        # content moves by +shift; the inverse map subtracts it
        mats.append(resample.translation(-shift_x * w, -shift_y * h))
    if not mats:
        return replace(sample, image=sample.image.copy(), mask=sample.mask.copy())
    matrix = resample.compose(*mats)
    image = resample.affine_sample(sample.image, matrix, (h, w), order="bilinear")
    np.clip(image, 0.0, 1.0, out=image)
    mask = resample.affine_sample(sample.mask, matrix, (h, w), order="nearest")
    mask = (mask >= 0.5).astype(np.float32)
    return replace(sample, image=image, mask=mask)


def augment(sample: Sample, config: AugmentationConfig, rng: np.random.Generator) -> Sample:
    """Randomly shift/rotate/flip a sample. All draws happen unconditionally
    so the stream layout never depends on earlier outcomes."""
    u = rng.random(5)
    angle = rng.uniform(*config.rotation_range)
    shift = rng.uniform(-config.shift_fraction, config.shift_fraction, size=2)
    p = config.probability
    return apply_affine(
        sample,
        angle=angle if u[0] < p else 0.0,
        shift_x=float(shift[0]) if u[1] < p else 0.0,
        shift_y=float(shift[1]) if u[2] < p else 0.0,
        hflip=config.enable_hflip and u[3] < p,
        vflip=config.enable_vflip and u[4] < p,
    )


def augment_rng(config: AugmentationConfig, sample_index: int, epoch: int) -> np.random.Generator:
    """Per-sample stream derived from (seed, sample, epoch); parallel-safe."""
    return rng_for(config.seed, sample_index, epoch)


# -- synthetic fundus-like data ------------------------------------------------

def _smooth_noise(rng: np.random.Generator, size: int, cells: int, amplitude: float) -> np.ndarray:
    coarse = rng.normal(0.0, 1.0, size=(cells, cells)).astype(np.float32)
    return resample.resize(coarse, (size, size), order="bilinear") * amplitude


def _stamp_disks(canvas: np.ndarray, points: np.ndarray, radius: float, value, blend: str):
    h, w = canvas.shape[:2]
    r = int(np.ceil(radius)) + 1
    for cx, cy in points:
        x0, x1 = max(0, int(cx) - r), min(w, int(cx) + r + 1)
        y0, y1 = max(0, int(cy) - r), min(h, int(cy) + r + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        ys, xs = np.mgrid[y0:y1, x0:x1]
        hit = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
        if blend == "mul":
            canvas[y0:y1, x0:x1][hit] *= value
        else:
            canvas[y0:y1, x0:x1][hit] = value


def _ellipse_mask(size: int, cx: float, cy: float, a: float, b: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    return ((xs - cx) / a) ** 2 + ((ys - cy) / b) ** 2 <= 1.0


def generate_synthetic(n: int, size: int, seed: int = 0) -> list[Sample]:
    """Fundus-like images: one bright elliptical target disc (2-10% of the
    area), distractor bright blobs that never touch it, vessel-like dark
    curves, and a textured background."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if size % 32:
        raise ShapeError(f"size must be divisible by 32, got {size}")
    samples = []
    for i in range(n):
        rng = rng_for(seed, i)
        base = rng.uniform(0.18, 0.32)
        gray = np.full((size, size), base, dtype=np.float32)
        gray += _smooth_noise(rng, size, max(4, size // 8), 0.04)

        # vessel-like dark curves wandering across the frame
        for _ in range(rng.integers(2, 5)):
            x = rng.uniform(0, size)
            y = rng.uniform(0, size)
            heading = rng.uniform(0, 2 * np.pi)
            pts = []
            for _ in range(int(size * 1.5)):
                pts.append((x, y))
                heading += rng.normal(0.0, 0.25)
                x += np.cos(heading)
                y += np.sin(heading)
            _stamp_disks(gray, np.array(pts), size / 96 + 0.6, 0.55, blend="mul")

        # the target disc: elliptical, 2-10% of the image area
        while True:
            frac = rng.uniform(0.025, 0.09)
            aspect = rng.uniform(0.8, 1.25)
            a = float(np.sqrt(frac * size * size * aspect / np.pi))
            b = a / aspect
            if a + 2 >= size - a - 2 or b + 2 >= size - b - 2:
                continue
            cx = rng.uniform(a + 2, size - a - 2)
            cy = rng.uniform(b + 2, size - b - 2)
            disc = _ellipse_mask(size, cx, cy, a, b)
            if 0.02 <= disc.mean() <= 0.10:
                break
        brightness = rng.uniform(0.72, 0.92)
        gray[disc] = brightness + 0.05 * _smooth_noise(rng, size, 4, 1.0)[disc]

        # distractor bright blobs, never overlapping the disc
        for _ in range(rng.integers(1, 4)):
            for _attempt in range(20):
                ra = rng.uniform(0.3, 0.8) * min(a, b)
                rb = ra * rng.uniform(0.8, 1.25)
                bx = rng.uniform(ra, size - ra - 1)
                by = rng.uniform(rb, size - rb - 1)
                blob = _ellipse_mask(size, bx, by, ra, rb)
                if not np.any(blob & disc):
                    gray[blob] = rng.uniform(0.6, 0.9)
                    break

        np.clip(gray, 0.0, 1.0, out=gray)
        image = np.stack([gray, gray * 0.55, gray * 0.30], axis=-1).astype(np.float32)
        mask = disc.astype(np.float32)[:, :, None]
        samples.append(Sample(image, mask, source_id=f"synth-{i:04d}",
                              annotator_ids=("synthetic",)))
    return samples


def save_dataset(samples: list[Sample], out_dir, test_fraction: float = 0.25) -> Path:
    """Write image/mask PNG pairs plus a manifest; the trailing fraction of
    samples is tagged test. Returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    n_test = int(round(len(samples) * test_fraction))
    records = []
    for i, s in enumerate(samples):
        name = s.source_id or f"sample-{i:04d}"
        image_path = out_dir / "images" / f"{name}.png"
        mask_path = out_dir / "masks" / f"{name}.png"
        save_image(s.image, image_path)
        save_mask(s.mask, mask_path)
        split = "test" if i >= len(samples) - n_test else "train"
        records.append(ManifestRecord(image_path, [mask_path], split))
    manifest = out_dir / "manifest.txt"
    write_manifest(records, manifest)
    return manifest


def save_image(image: Tensor, path) -> None:
    arr = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def save_mask(mask: Tensor, path) -> None:
    arr = (mask[:, :, 0] > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def batch_iter(samples: list[Sample], batch_size: int,
               rng: np.random.Generator | None = None):
    """Yield (images, masks) array pairs; shuffles when rng is given."""
    order = np.arange(len(samples))
    if rng is not None:
        order = rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        chunk = [samples[i] for i in order[start:start + batch_size]]
        images = np.stack([s.image for s in chunk])
        masks = np.stack([s.mask for s in chunk])
        yield images, masks
