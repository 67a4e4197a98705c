"""Dataset ingestion and preprocessing.

Images come in as arbitrary rasters and leave as float32 H×W×3 tensors with
intensities in [0, 1]: center-cropped to the largest square, bilinearly
resized to a common side, grayscale replicated to RGB, alpha dropped. Also
hosts the deterministic train/eval split and a procedural desk-scale corpus
used by the overfit tests.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from math import ceil, floor
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import IngestionError, ValidationError
from .seeding import named_stream

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

_DTYPE_MAX = {np.dtype(np.uint8): 255.0, np.dtype(np.uint16): 65535.0, np.dtype(np.int32): 65535.0}


@dataclass(frozen=True)
class CorpusConfig:
    source_dir: str | None = None
    target_side: int = 128
    split: tuple[float, float] = (0.8, 0.2)
    shuffle_seed: int = 0

    def __post_init__(self):
        train_frac, eval_frac = self.split
        if train_frac <= 0 or eval_frac <= 0 or train_frac + eval_frac > 1.0 + 1e-9:
            raise ValidationError(f"split fractions must be positive and sum <= 1, got {self.split}")
        if self.target_side < 8:
            raise ValidationError(f"target_side must be >= 8, got {self.target_side}")

    def resolved_source_dir(self) -> Path:
        src = self.source_dir or os.environ.get("WGAIN_DATA_DIR")
        if not src:
            raise ValidationError("no source_dir given and WGAIN_DATA_DIR is not set")
        return Path(src)


def validate_image(arr: np.ndarray) -> np.ndarray:
    """Check the H×W×3, [0, 1] contract of a preprocessed image tensor."""
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"image tensor must be HxWx3, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError("image tensor must have positive dims")
    if not np.isfinite(arr).all():
        raise ValidationError("image tensor contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError("image tensor values must lie in [0, 1]")
    return arr


def normalize_image(raw: np.ndarray) -> np.ndarray:
    """Coerce a decoded raster to float32 H×W×3 in [0, 1], original size.

    Integer inputs are divided by their bit-depth maximum; float inputs are
    assumed to already be in [0, 1] and are clipped. Grayscale is replicated
    to three channels, alpha is dropped.
    """
    arr = np.asarray(raw)
    if arr.size == 0:
        raise ValidationError("cannot preprocess a zero-area image")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3, 4):
        raise ValidationError(f"expected 1, 3, or 4 channels, got shape {arr.shape}")
    if arr.shape[2] == 4:
        arr = arr[:, :, :3]
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)

    if np.issubdtype(arr.dtype, np.floating):
        img = np.clip(arr.astype(np.float32), 0.0, 1.0)
    else:
        peak = _DTYPE_MAX.get(arr.dtype)
        if peak is None:
            raise ValidationError(f"unsupported pixel dtype {arr.dtype}")
        img = arr.astype(np.float32) / peak
    return np.ascontiguousarray(img)


def preprocess_image(raw: np.ndarray, target_side: int) -> np.ndarray:
    """Normalize a decoded raster into the common float32 H×W×3 [0, 1] form.

    The center crop keeps the largest square (ties toward the top-left), and
    the resize is skipped when the crop already has the target side, so
    preprocessing is exactly idempotent on already-conforming images.
    """
    img = normalize_image(raw)
    h, w = img.shape[:2]
    size = min(h, w)
    top = (h - size) // 2
    left = (w - size) // 2
    img = img[top : top + size, left : left + size]
    if size != target_side:
        img = cv2.resize(img, (target_side, target_side), interpolation=cv2.INTER_LINEAR)
        img = np.clip(img, 0.0, 1.0)
    return validate_image(np.ascontiguousarray(img, dtype=np.float32))


def decode_image_file(path: str | Path) -> np.ndarray:
    """Decode a raster file to a numpy array, raising IngestionError with the path."""
    try:
        with Image.open(path) as img:
            if img.mode == "P":
                img = img.convert("RGBA")
            return np.asarray(img)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot decode image file {path}: {exc}") from exc


class Corpus:
    """Lazy sequence of preprocessed image tensors.

    Items are either file paths (decoded and preprocessed on access) or
    in-memory arrays (returned as-is); every item satisfies the H×W×3 [0, 1]
    contract at the corpus target side.
    """

    def __init__(self, items, target_side: int, name: str = "corpus"):
        self.items = list(items)
        self.target_side = int(target_side)
        self.name = name

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> np.ndarray:
        item = self.items[i]
        if isinstance(item, np.ndarray):
            return item
        return preprocess_image(decode_image_file(item), self.target_side)

    def load_all(self) -> np.ndarray:
        """Stack the whole corpus into an N×H×W×3 array."""
        return np.stack([self[i] for i in range(len(self))], axis=0)


def load_corpus(cfg: CorpusConfig) -> tuple[Corpus, Corpus]:
    """Deterministic shuffled train/eval split of an image directory.

    The file list is sorted, shuffled by shuffle_seed, and split with
    n_train = ceil(n * train_frac) and n_eval = min(remaining,
    floor(n * eval_frac)). The ceil on the training side guarantees a
    one-file corpus lands in the training set; an empty eval split logs a
    warning.
    """
    src = cfg.resolved_source_dir()
    if not src.is_dir():
        raise IngestionError(f"corpus directory does not exist: {src}")
    paths = sorted(p for p in src.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not paths:
        raise IngestionError(f"no decodable images found in {src}")
    order = named_stream(cfg.shuffle_seed, "corpus-shuffle").permutation(len(paths))
    paths = [paths[i] for i in order]

    train_frac, eval_frac = cfg.split
    n = len(paths)
    n_train = min(n, ceil(n * train_frac))
    n_eval = min(n - n_train, floor(n * eval_frac))
    if n_eval == 0:
        log.warning("eval split is empty (%d files, split %s)", n, cfg.split)
    train = Corpus(paths[:n_train], cfg.target_side, name="train")
    evalset = Corpus(paths[n_train : n_train + n_eval], cfg.target_side, name="eval")
    return train, evalset


def make_synthetic_corpus(n: int, side: int, rng: np.random.Generator) -> Corpus:
    """Procedural desk-scale corpus: gradients, circles, textured rectangles.

    Deterministic given the generator state; every image is side×side×3 in
    [0, 1] with enough structure for overfit and reconstruction tests.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1 synthetic images, got {n}")
    makers = (_gradient_image, _circles_image, _rects_image)
    images = [makers[i % len(makers)](side, rng) for i in range(n)]
    return Corpus(images, side, name="synthetic")


def _coord_ramp(side: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, side, dtype=np.float32)


def _gradient_image(side: int, rng: np.random.Generator) -> np.ndarray:
    # channel 0 is strictly monotone along the chosen axis
    axis = int(rng.integers(0, 2))
    t = _coord_ramp(side)
    grid = t[:, None] if axis == 0 else t[None, :]
    img = np.empty((side, side, 3), dtype=np.float32)
    for c in range(3):
        base = rng.uniform(0.02, 0.08)
        gain = rng.uniform(0.3, 0.9)
        img[:, :, c] = base + gain * grid
    return validate_image(img)


def _circles_image(side: int, rng: np.random.Generator) -> np.ndarray:
    img = np.ones((side, side, 3), dtype=np.float32) * rng.uniform(0.1, 0.4, size=3).astype(np.float32)
    yy, xx = np.mgrid[0:side, 0:side]
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.2 * side, 0.8 * side, size=2)
        r = rng.uniform(0.1 * side, 0.3 * side)
        color = rng.uniform(0.4, 0.95, size=3)
        inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
        img[inside] = color.astype(np.float32)
    return validate_image(img)


def _rects_image(side: int, rng: np.random.Generator) -> np.ndarray:
    img = np.ones((side, side, 3), dtype=np.float32) * rng.uniform(0.2, 0.5, size=3).astype(np.float32)
    yy, xx = np.mgrid[0:side, 0:side]
    for _ in range(int(rng.integers(2, 5))):
        y0, x0 = rng.integers(0, side // 2, size=2)
        hgt, wid = rng.integers(side // 4, side // 2 + 1, size=2)
        color = rng.uniform(0.3, 0.9, size=3).astype(np.float32)
        freq = rng.uniform(0.2, 0.8)
        texture = 0.5 + 0.45 * np.sin(freq * (xx[: int(hgt), : int(wid)] + yy[: int(hgt), : int(wid)]))
        patch = color[None, None, :] * texture[:, :, None].astype(np.float32)
        img[y0 : y0 + int(hgt), x0 : x0 + int(wid)] = patch[: side - y0, : side - x0]
    return validate_image(np.clip(img, 0.0, 1.0))
