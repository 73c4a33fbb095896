"""Dataset ingestion, image decoding, preprocessing, augmentation, splitting.

Images arrive through a CSV manifest (``path,label`` header, paths
relative to the manifest's directory, ``#`` lines ignored).  The five
scene classes carry stable integer codes 0..4.

Augmentation applies label-preserving transforms to preprocessed
(resized, mean-subtracted) square images; translation vacates pixels to
zero, which after mean subtraction sits at the channel mean.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensor import FLOAT, ShapeError, Tensor, check_tensor


class ClassLabel(IntEnum):
    buildings_collapsed = 0
    flames_or_smoke = 1
    flood = 2
    forests_rivers = 3
    urban_landscape = 4


CLASS_NAMES = tuple(label.name for label in ClassLabel)
NUM_CLASSES = len(CLASS_NAMES)

# Conventional per-channel RGB means on the 0-255 scale, matching what the
# backbone's pretraining pipeline subtracts.  Configurable at every call site.
IMAGENET_MEANS = (123.68, 116.779, 103.939)


class ManifestError(ValueError):
    """The dataset manifest is malformed or names an unknown label."""


class ImageDecodeError(ValueError):
    """An image file is unsupported or its stream is corrupt."""


@dataclass(frozen=True)
class Sample:
    path: str  # resolved against the manifest's directory
    label: int

    def __post_init__(self):
        if not self.path:
            raise ValueError("sample path must be non-empty")


@dataclass
class Manifest:
    samples: list[Sample]
    class_counts: list[int]  # indexed by class code
    missing_files: int  # entries whose file does not exist (kept, warned)

    def __len__(self) -> int:
        return len(self.samples)


def load_manifest(path) -> Manifest:
    """Read ``path,label`` rows into samples, in file order.

    Unknown label names abort with the offending line number.  Entries
    whose image file is absent are kept but counted in ``missing_files``.
    """
    base = os.path.dirname(os.path.abspath(path))
    samples: list[Sample] = []
    counts = [0] * NUM_CLASSES
    missing = 0
    header_seen = False
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            row = next(csv.reader(io.StringIO(line)))
            if not header_seen:
                if [cell.strip() for cell in row] != ["path", "label"]:
                    raise ManifestError(
                        f"{path} line {line_no}: expected header 'path,label', got {line!r}"
                    )
                header_seen = True
                continue
            if len(row) != 2:
                raise ManifestError(f"{path} line {line_no}: expected 'path,label', got {line!r}")
            rel, label_name = row[0].strip(), row[1].strip()
            if not rel:
                raise ManifestError(f"{path} line {line_no}: empty image path")
            if label_name not in ClassLabel.__members__:
                raise ManifestError(f"{path} line {line_no}: unknown label {label_name!r}")
            label = int(ClassLabel[label_name])
            full = rel if os.path.isabs(rel) else os.path.join(base, rel)
            if not os.path.exists(full):
                missing += 1
            samples.append(Sample(full, label))
            counts[label] += 1
    if not header_seen:
        raise ManifestError(f"{path}: empty manifest, expected a 'path,label' header")
    return Manifest(samples, counts, missing)


def _decode_ppm(data: bytes, path) -> Tensor:
    # P6 binary: "P6" <ws> width <ws> height <ws> maxval <single ws> raw RGB
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise ImageDecodeError(f"{path}: malformed PPM header")
        fields.append(int(token))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ImageDecodeError(f"{path}: PPM maxval must be 255, got {maxval}")
    raw = data[pos : pos + 3 * width * height]
    if len(raw) != 3 * width * height:
        raise ImageDecodeError(f"{path}: truncated PPM pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=FLOAT)


def decode_image(path) -> Tensor:
    """Decode PPM (P6, maxval 255) or PNG (8-bit RGB/grayscale) to [3,h,w] in [0,255].

    Channel order is R,G,B; grayscale is promoted to three equal channels.
    """
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P6":
        with open(path, "rb") as fh:
            return _decode_ppm(fh.read(), path)
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise ImageDecodeError(f"{path}: unsupported format {img.format!r} (want PPM or PNG)")
            if img.mode == "L":
                img = img.convert("RGB")
            if img.mode != "RGB":
                raise ImageDecodeError(f"{path}: unsupported PNG mode {img.mode!r} (want RGB or grayscale)")
            pixels = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as e:
        raise ImageDecodeError(f"{path}: not a PPM or PNG file") from e
    except OSError as e:
        raise ImageDecodeError(f"{path}: corrupt image stream ({e})") from e
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=FLOAT)


def resize_bilinear(img: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resample of a [3,h,w] image with half-pixel-centre sampling.

    Source coordinate of output pixel i is (i + 0.5) * in/out - 0.5,
    clamped to the valid range; the four neighbours are blended linearly.
    """
    img = check_tensor(img, rank=3, name="img")
    _, h, w = img.shape
    if out_h == h and out_w == w:
        return img.copy()
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(FLOAT)[None, :, None]
    wx = (xs - x0).astype(FLOAT)[None, None, :]
    top = img[:, y0][:, :, x0] * (1 - wx) + img[:, y0][:, :, x1] * wx
    bot = img[:, y1][:, :, x0] * (1 - wx) + img[:, y1][:, :, x1] * wx
    return np.ascontiguousarray(top * (1 - wy) + bot * wy, dtype=FLOAT)


def preprocess(
    img: Tensor, target: int = 224, means: tuple[float, float, float] = IMAGENET_MEANS
) -> Tensor:
    """Resize a [3,h,w] image to [3,target,target] and subtract per-channel means."""
    if target < 1:
        raise ShapeError(f"target side must be >= 1, got {target}")
    img = check_tensor(img, rank=3, name="img")
    out = resize_bilinear(img, target, target)
    out -= np.asarray(means, dtype=FLOAT)[:, None, None]
    return out


@dataclass
class AugmentationConfig:
    """Label-preserving transform set applied per training image per epoch."""

    max_translation_fraction: float = 0.1
    enable_transpose: bool = True
    enable_horizontal_flip: bool = True
    enable_vertical_flip: bool = True
    rgb_jitter_stddev: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.max_translation_fraction <= 1.0:
            raise ValueError("max_translation_fraction must lie in [0, 1]")
        if self.rgb_jitter_stddev < 0:
            raise ValueError("rgb_jitter_stddev must be >= 0")

    @property
    def identity(self) -> bool:
        return (
            self.max_translation_fraction == 0.0
            and not self.enable_transpose
            and not self.enable_horizontal_flip
            and not self.enable_vertical_flip
            and self.rgb_jitter_stddev == 0.0
        )


def translate_image(img: Tensor, dy: int, dx: int) -> Tensor:
    """Shift a [3,h,w] image by (dy, dx), filling vacated pixels with zero."""
    img = check_tensor(img, rank=3, name="img")
    _, h, w = img.shape
    out = np.zeros_like(img)
    src_y = slice(max(0, -dy), min(h, h - dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    if src_y.start < src_y.stop and src_x.start < src_x.stop:
        out[:, dst_y, dst_x] = img[:, src_y, src_x]
    return out


def transpose_image(img: Tensor) -> Tensor:
    """Swap height and width (requires a square image)."""
    img = check_tensor(img, rank=3, name="img")
    if img.shape[1] != img.shape[2]:
        raise ShapeError("transpose requires a square image")
    return np.ascontiguousarray(img.transpose(0, 2, 1))


def flip_horizontal(img: Tensor) -> Tensor:
    return np.ascontiguousarray(img[:, :, ::-1])


def flip_vertical(img: Tensor) -> Tensor:
    return np.ascontiguousarray(img[:, ::-1, :])


def rgb_intensity_shift(img: Tensor, alphas) -> Tensor:
    """Shift channel intensities along the image's RGB principal components.

    The 3x3 channel covariance is computed on the [0,1] scale; the shift
    adds eigvecs @ (alphas * eigvals), scaled back by 255, to each channel.
    """
    img = check_tensor(img, rank=3, name="img")
    flat = img.reshape(3, -1).astype(np.float64) / 255.0
    cov = np.cov(flat)
    eigvals, eigvecs = np.linalg.eigh(cov)
    shift = 255.0 * (eigvecs @ (np.asarray(alphas, dtype=np.float64) * eigvals))
    return np.ascontiguousarray(img + shift.astype(FLOAT)[:, None, None], dtype=FLOAT)


def augment(img: Tensor, cfg: AugmentationConfig, rng: np.random.Generator) -> Tensor:
    """Apply translation, transpose, flips, and RGB jitter, in that order.

    Deterministic given ``rng``'s state; the label is untouched by
    construction.  An all-off config returns a bit-identical image.
    """
    img = check_tensor(img, rank=3, name="img")
    if img.shape[1] != img.shape[2]:
        raise ShapeError("augment requires a square image")
    if cfg.identity:
        return img
    side = img.shape[1]
    max_shift = int(cfg.max_translation_fraction * side)
    if max_shift > 0:
        dy, dx = rng.integers(-max_shift, max_shift + 1, size=2)
        if dy or dx:
            img = translate_image(img, int(dy), int(dx))
    if cfg.enable_transpose and rng.random() < 0.5:
        img = transpose_image(img)
    if cfg.enable_horizontal_flip and rng.random() < 0.5:
        img = flip_horizontal(img)
    if cfg.enable_vertical_flip and rng.random() < 0.5:
        img = flip_vertical(img)
    if cfg.rgb_jitter_stddev > 0:
        img = rgb_intensity_shift(img, rng.normal(0.0, cfg.rgb_jitter_stddev, size=3))
    return img


@dataclass
class SplitSpec:
    """Seeded random train/test partition: a train fraction or an explicit test count."""

    train_fraction: float | None = None
    test_count: int | None = None
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if (self.train_fraction is None) == (self.test_count is None):
            raise ValueError("set exactly one of train_fraction / test_count")
        if self.train_fraction is not None and not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.test_count is not None and self.test_count < 1:
            raise ValueError("test_count must be >= 1")


def _train_size(n: int, spec: SplitSpec) -> int:
    if spec.test_count is not None:
        if spec.test_count >= n:
            raise ValueError(f"test_count {spec.test_count} must be < dataset size {n}")
        return n - spec.test_count
    n_train = int(np.floor(spec.train_fraction * n + 0.5))  # round half up
    if n_train < 1 or n_train >= n:
        raise ValueError(f"train_fraction {spec.train_fraction} infeasible for {n} samples")
    return n_train


def split_dataset(samples: list[Sample], spec: SplitSpec) -> tuple[list[Sample], list[Sample]]:
    """Uniformly random disjoint partition under the split seed.

    Stratified mode permutes within each class and takes the same train
    fraction per class, assigning remainders by largest fractional part.
    """
    from .seeding import derived_rng

    n = len(samples)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    rng = derived_rng(spec.seed, "split")
    if not spec.stratified:
        order = rng.permutation(n)
        n_train = _train_size(n, spec)
        train = [samples[i] for i in order[:n_train]]
        test = [samples[i] for i in order[n_train:]]
        return train, test

    n_train_total = _train_size(n, spec)
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(s.label, []).append(i)
    frac = n_train_total / n
    quotas = {c: frac * len(idx) for c, idx in by_class.items()}
    base = {c: int(np.floor(q)) for c, q in quotas.items()}
    leftover = n_train_total - sum(base.values())
    for c in sorted(by_class, key=lambda c: quotas[c] - base[c], reverse=True)[:leftover]:
        base[c] += 1
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in sorted(by_class):
        order = rng.permutation(len(by_class[c]))
        picked = [by_class[c][j] for j in order]
        train_idx.extend(picked[: base[c]])
        test_idx.extend(picked[base[c] :])
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


def write_ppm(img: Tensor, path) -> None:
    """Write a [3,h,w] tensor (values 0..255) as binary P6, the inverse of decode."""
    img = check_tensor(img, rank=3, name="img")
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    h, w = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(pixels.tobytes())
