"""Mask generation for the three scenarios of missingness.

A mask is an H×W binary grid: 1 marks a valid pixel, 0 a missing one. The
scenarios are pixelwise noise, one centered square, and multiple randomly
placed squares; each comes in a randomized training variant and a fixed
evaluation variant. All sampling goes through an explicit numpy Generator so
identical (spec, dims, seed) always give the identical mask.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from PIL import Image

from .errors import ContractError, ValidationError
from .pngcodec import encode_gray_png

# Training-time multi-square rule: corner box spans [-2l, 3l] per axis and
# sides span [l/5, l/3]; the count is fixed, only geometry is random.
TRAIN_MULTI_SQUARE_COUNT = 30

# Training-time noise probability range.
TRAIN_NOISE_P_RANGE = (0.5, 0.95)


class ScenarioKind(str, Enum):
    NOISE = "noise"
    CENTER_SQUARE = "center_square"
    MULTI_SQUARE = "multi_square"


@dataclass(frozen=True)
class Mask:
    """Binary validity mask: 1 = valid pixel, 0 = missing pixel."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8, copy=False)
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError("mask entries must be exactly 0 or 1")
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def missing_fraction(self) -> float:
        return missing_fraction(self)

    def __eq__(self, other) -> bool:
        return isinstance(other, Mask) and np.array_equal(self.bits, other.bits)


def missing_fraction(mask: Mask) -> float:
    """Fraction of zero entries, in [0, 1]."""
    bits = mask.bits
    return float(np.count_nonzero(bits == 0) / bits.size)


def gen_noise_mask(h: int, w: int, p: float, rng: np.random.Generator) -> Mask:
    """Each pixel missing independently with probability p."""
    _check_dims(h, w)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"noise probability must be in [0, 1], got {p}")
    bits = (rng.random((h, w)) >= p).astype(np.uint8)
    return Mask(bits)


def gen_center_square_mask(h: int, w: int, side: int) -> Mask:
    """One side×side missing square centered in the grid.

    Centering ties for odd (h - side) break toward the top-left:
    offset = floor((h - side) / 2).
    """
    _check_dims(h, w)
    if not 0 < side <= min(h, w):
        raise ValidationError(f"square side must be in [1, {min(h, w)}], got {side}")
    top = (h - side) // 2
    left = (w - side) // 2
    bits = np.ones((h, w), dtype=np.uint8)
    bits[top : top + side, left : left + side] = 0
    return Mask(bits)


def gen_multi_square_mask_eval(
    h: int, w: int, count: int, side: int, rng: np.random.Generator
) -> Mask:
    """Union of `count` side×side missing squares, each fully inside the grid.

    Top-left corners are uniform over [0, h-side] × [0, w-side]; squares may
    overlap, so the missing area is at most count * side**2.
    """
    _check_dims(h, w)
    if count < 1:
        raise ValidationError(f"square count must be >= 1, got {count}")
    if not 0 < side <= min(h, w):
        raise ValidationError(f"square side must be in [1, {min(h, w)}], got {side}")
    bits = np.ones((h, w), dtype=np.uint8)
    for _ in range(count):
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
        bits[top : top + side, left : left + side] = 0
    return Mask(bits)


def gen_multi_square_mask_train(h: int, w: int, rng: np.random.Generator) -> Mask:
    """Training-time multi-square mask on a square l×l grid.

    Draws 30 squares with corners uniform over the box [-2l, 3l]^2 and sides
    uniform over [l/5, l/3], then keeps the part of their union that overlaps
    the image. Squares landing fully outside contribute nothing, so the
    all-ones mask is a possible outcome.
    """
    _check_dims(h, w)
    if h != w:
        raise ValidationError(f"training multi-square masks need square dims, got {h}x{w}")
    l = h
    bits = np.ones((l, l), dtype=np.uint8)
    # one uniform draw per square: (row corner, col corner, side)
    corners = rng.uniform(-2.0 * l, 3.0 * l, size=(TRAIN_MULTI_SQUARE_COUNT, 2))
    sides = rng.uniform(l / 5.0, l / 3.0, size=TRAIN_MULTI_SQUARE_COUNT)
    for (r0, c0), s in zip(corners, sides):
        # pixel i is covered iff r0 <= i < r0 + s, likewise for columns
        ri = max(0, int(np.ceil(r0)))
        rj = min(l, int(np.ceil(r0 + s)))
        ci = max(0, int(np.ceil(c0)))
        cj = min(l, int(np.ceil(c0 + s)))
        if ri < rj and ci < cj:
            bits[ri:rj, ci:cj] = 0
    return Mask(bits)


def center_square_train_side_bounds(l: int) -> tuple[int, int]:
    """Integer side interval for training center squares: [ceil(l/2.5), floor(l/1.6)].

    Computed in exact integer arithmetic (l/2.5 = 2l/5, l/1.6 = 5l/8) so the
    bounds never suffer float rounding, e.g. l=128 gives (52, 80).
    """
    lo = (2 * l + 4) // 5
    hi = (5 * l) // 8
    return lo, hi


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameterized missingness distribution.

    kind selects among the three scenarios; a train-variant spec with
    kind=None is the standard training mixture that picks one of the three
    uniformly per sample. params carries kind-specific values: noise wants
    `p` (eval) or `p_range` (train), center_square wants `side` (eval) or
    `side_range` (train), multi_square wants `count` and `side` (eval).
    """

    kind: ScenarioKind | None
    variant: str = "eval"
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.variant not in ("train", "eval"):
            raise ValidationError(f"variant must be 'train' or 'eval', got {self.variant!r}")
        if self.kind is None:
            if self.variant != "train":
                raise ValidationError("kind=None (scenario mixture) is train-only")
            return
        kind = ScenarioKind(self.kind)
        object.__setattr__(self, "kind", kind)
        p = dict(self.params)
        if kind is ScenarioKind.NOISE:
            if self.variant == "eval":
                prob = p.get("p")
                if prob is None or not 0.0 <= float(prob) <= 1.0:
                    raise ValidationError(f"eval noise spec needs p in [0, 1], got {prob}")
            else:
                lo, hi = p.get("p_range", TRAIN_NOISE_P_RANGE)
                if not (0.0 <= lo < hi <= 1.0):
                    raise ValidationError(f"noise p_range must be a non-empty subinterval of [0, 1], got {(lo, hi)}")
        elif kind is ScenarioKind.CENTER_SQUARE:
            if self.variant == "eval":
                side = p.get("side")
                if side is None or int(side) < 1:
                    raise ValidationError(f"eval center-square spec needs a positive side, got {side}")
            elif "side_range" in p:
                lo, hi = p["side_range"]
                if not (0 < lo <= hi):
                    raise ValidationError(f"side_range must be a non-empty positive interval, got {(lo, hi)}")
        elif kind is ScenarioKind.MULTI_SQUARE:
            if self.variant == "eval":
                count, side = p.get("count"), p.get("side")
                if count is None or int(count) < 1:
                    raise ValidationError(f"eval multi-square spec needs count >= 1, got {count}")
                if side is None or int(side) < 1:
                    raise ValidationError(f"eval multi-square spec needs a positive side, got {side}")

    @staticmethod
    def training_mixture(seed: int | None = None) -> "ScenarioSpec":
        """The standard training distribution: uniform over the three kinds."""
        return ScenarioSpec(kind=None, variant="train", seed=seed)

    def describe(self) -> dict:
        """JSON-safe summary for report fingerprints and run manifests."""
        params = {
            k: list(v) if isinstance(v, (tuple, list)) else v
            for k, v in dict(self.params).items()
        }
        kind = None if self.kind is None else ScenarioKind(self.kind).value
        return {"kind": kind, "variant": self.variant, "params": params}


def sample_eval_mask(spec: ScenarioSpec, h: int, w: int, rng: np.random.Generator) -> Mask:
    """Draw one mask from an eval-variant spec."""
    if spec.variant != "eval":
        raise ContractError("sample_eval_mask needs an eval-variant spec")
    if spec.kind is ScenarioKind.NOISE:
        return gen_noise_mask(h, w, float(spec.params["p"]), rng)
    if spec.kind is ScenarioKind.CENTER_SQUARE:
        return gen_center_square_mask(h, w, int(spec.params["side"]))
    return gen_multi_square_mask_eval(h, w, int(spec.params["count"]), int(spec.params["side"]), rng)


def sample_training_mask(spec: ScenarioSpec, h: int, w: int, rng: np.random.Generator) -> Mask:
    """Draw one training-time mask.

    For the mixture spec (kind=None) the scenario kind is chosen uniformly
    among the three; a concrete kind restricts sampling to that scenario's
    training distribution. Noise draws p ~ U[0.5, 0.95]; the center square
    draws an integer side from [ceil(l/2.5), floor(l/1.6)] with l = min(h, w).
    """
    if spec.variant != "train":
        raise ContractError("sample_training_mask needs a train-variant spec")
    kind = spec.kind
    if kind is None:
        kind = ScenarioKind(rng.choice([k.value for k in ScenarioKind]))
    if kind is ScenarioKind.NOISE:
        lo, hi = spec.params.get("p_range", TRAIN_NOISE_P_RANGE)
        return gen_noise_mask(h, w, float(rng.uniform(lo, hi)), rng)
    if kind is ScenarioKind.CENTER_SQUARE:
        if "side_range" in spec.params:
            lo, hi = spec.params["side_range"]
        else:
            lo, hi = center_square_train_side_bounds(min(h, w))
        return gen_center_square_mask(h, w, int(rng.integers(lo, hi + 1)))
    return gen_multi_square_mask_train(h, w, rng)


def standard_eval_scenarios(side: int) -> dict[str, ScenarioSpec]:
    """The five fixed evaluation scenarios, keyed by report row label."""
    return {
        "single_square_25": ScenarioSpec(
            ScenarioKind.CENTER_SQUARE, "eval", {"side": side // 2}
        ),
        "multi_square_25": ScenarioSpec(
            ScenarioKind.MULTI_SQUARE, "eval", {"count": 5, "side": 31}
        ),
        "noise_50": ScenarioSpec(ScenarioKind.NOISE, "eval", {"p": 0.5}),
        "noise_75": ScenarioSpec(ScenarioKind.NOISE, "eval", {"p": 0.75}),
        "noise_95": ScenarioSpec(ScenarioKind.NOISE, "eval", {"p": 0.95}),
    }


# --- serialization ----------------------------------------------------------
# PNG convention: grayscale, 0 = missing, 255 = valid. RLE convention: header
# "wgain-rle <h> <w> <first_bit>" then run lengths in row-major order with
# alternating bit values starting at first_bit.


def mask_to_png_bytes(mask: Mask) -> bytes:
    return encode_gray_png(mask.bits * np.uint8(255))


def mask_from_png_bytes(data: bytes) -> Mask:
    try:
        img = Image.open(io.BytesIO(data))
        arr = np.asarray(img.convert("L"))
    except Exception as exc:
        raise ValidationError(f"cannot decode mask PNG: {exc}") from exc
    return Mask((arr >= 128).astype(np.uint8))


def mask_to_rle(mask: Mask) -> str:
    flat = mask.bits.ravel()
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds)
    head = f"wgain-rle {mask.height} {mask.width} {int(flat[0])}"
    return head + "\n" + " ".join(str(int(r)) for r in runs) + "\n"


def mask_from_rle(text: str) -> Mask:
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("wgain-rle"):
        raise ValidationError("not a wgain-rle document")
    try:
        _, h, w, first = lines[0].split()
        h, w, first = int(h), int(w), int(first)
        runs = [int(t) for t in " ".join(lines[1:]).split()]
    except ValueError as exc:
        raise ValidationError(f"malformed rle document: {exc}") from exc
    if first not in (0, 1):
        raise ValidationError(f"rle first bit must be 0 or 1, got {first}")
    if sum(runs) != h * w or any(r <= 0 for r in runs):
        raise ValidationError("rle runs do not cover the grid")
    flat = np.empty(h * w, dtype=np.uint8)
    pos, bit = 0, first
    for r in runs:
        flat[pos : pos + r] = bit
        pos += r
        bit ^= 1
    return Mask(flat.reshape(h, w))


def _check_dims(h: int, w: int) -> None:
    if h < 1 or w < 1:
        raise ValidationError(f"mask dims must be positive, got {h}x{w}")
