"""Image, mask, and segment data model plus the mask algebra.

Masks are stored run-length encoded over the row-major flattened pixel
grid and are always kept in canonical form: runs sorted by start, no
overlaps, and a gap of at least one zero pixel between consecutive runs
(adjacent runs are merged at construction). The codec is a bijection
between canonical masks and binary grids.

Images are 8-bit RGB throughout; alpha channels are dropped at load.
All operations here are pure functions on immutable values.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage


class SegeditError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(SegeditError):
    """Operands do not share the same width/height."""


class MalformedMaskError(SegeditError):
    """Run list violates the canonical mask invariants."""


def _check_same_dims(a, b, what: str) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"{what}: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """An 8-bit RGB image backed by a read-only (h, w, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if np.any((px < 0) | (px > 255)):
                raise ValueError("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        else:
            px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height})"

    @classmethod
    def filled(cls, width: int, height: int, color=(0, 0, 0)) -> "ImageBuffer":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:, :] = color
        return cls(px)

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "ImageBuffer":
        """Decode PNG (or any Pillow-readable) bytes; non-RGB modes are converted."""
        img = Image.open(io.BytesIO(data))
        if img.mode in ("RGBA", "LA", "PA"):
            warnings.warn(
                f"dropping alpha channel from {img.mode} image", stacklevel=2
            )
        if img.mode != "RGB":
            img = img.convert("RGB")
        return cls(np.asarray(img))

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class Mask:
    """Binary region over a width x height grid, as canonical RLE runs.

    Each run is a (start, length) pair over the row-major flattened grid;
    runs may span row boundaries. Construction validates canonical form
    and raises MalformedMaskError otherwise; use from_runs() to build
    from an uncanonicalized run list.
    """

    width: int
    height: int
    runs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MalformedMaskError(f"bad grid {self.width}x{self.height}")
        runs = tuple((int(s), int(n)) for s, n in self.runs)
        object.__setattr__(self, "runs", runs)
        total = self.width * self.height
        prev_end = None
        for start, length in runs:
            if length < 1:
                raise MalformedMaskError(f"run length {length} < 1")
            if start < 0 or start + length > total:
                raise MalformedMaskError(
                    f"run ({start}, {length}) exceeds grid of {total} pixels"
                )
            if prev_end is not None and start <= prev_end:
                raise MalformedMaskError(
                    f"run at {start} overlaps or touches previous run ending at {prev_end}"
                )
            prev_end = start + length

    @classmethod
    def empty(cls, width: int, height: int) -> "Mask":
        return cls(width, height, ())

    @classmethod
    def full(cls, width: int, height: int) -> "Mask":
        return cls(width, height, ((0, width * height),))

    @classmethod
    def from_runs(cls, width: int, height: int, runs) -> "Mask":
        """Build a canonical mask from any run list: sorts and merges
        overlapping or adjacent runs."""
        merged: list[list[int]] = []
        for start, length in sorted((int(s), int(n)) for s, n in runs):
            if length < 1:
                raise MalformedMaskError(f"run length {length} < 1")
            if merged and start <= merged[-1][0] + merged[-1][1]:
                end = max(merged[-1][0] + merged[-1][1], start + length)
                merged[-1][1] = end - merged[-1][0]
            else:
                merged.append([start, length])
        return cls(width, height, tuple((s, n) for s, n in merged))

    @property
    def area(self) -> int:
        return sum(n for _, n in self.runs)

    @property
    def is_empty(self) -> bool:
        return not self.runs

    def to_json(self) -> dict:
        """Canonical wire/storage form: {"w", "h", "runs": [[start, length], ...]}."""
        return {"w": self.width, "h": self.height, "runs": [list(r) for r in self.runs]}

    @classmethod
    def from_json(cls, obj: dict) -> "Mask":
        try:
            w, h, runs = int(obj["w"]), int(obj["h"]), obj["runs"]
            runs = tuple((int(s), int(n)) for s, n in runs)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedMaskError(f"bad mask JSON: {exc}") from exc
        return cls(w, h, runs)


def rle_encode(bitmap) -> Mask:
    """Encode a 2-D binary grid (any truthy values) as a canonical Mask."""
    grid = np.asarray(bitmap)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError(f"expected a 2-D grid of at least 1x1, got shape {grid.shape}")
    h, w = grid.shape
    flat = (grid != 0).ravel()
    edges = np.diff(np.concatenate(([False], flat, [False])).astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    runs = tuple((int(s), int(e - s)) for s, e in zip(starts, ends))
    return Mask(w, h, runs)


def rle_decode(mask: Mask) -> np.ndarray:
    """Decode a Mask to a (height, width) boolean grid. Exact inverse of rle_encode."""
    flat = np.zeros(mask.width * mask.height, dtype=bool)
    for start, length in mask.runs:
        flat[start : start + length] = True
    return flat.reshape(mask.height, mask.width)


def mask_bbox(mask: Mask) -> tuple[int, int, int, int] | None:
    """Tight (x0, y0, x1, y1) bounding box, inclusive-exclusive; None if empty."""
    if mask.is_empty:
        return None
    w = mask.width
    x0, x1 = w, 0
    y0 = mask.runs[0][0] // w
    y1 = (mask.runs[-1][0] + mask.runs[-1][1] - 1) // w
    for start, length in mask.runs:
        end = start + length - 1
        if start // w == end // w:
            x0 = min(x0, start % w)
            x1 = max(x1, end % w)
        else:
            # run spans a row boundary, so it touches both grid edges
            x0, x1 = 0, w - 1
    return (x0, y0, x1 + 1, y1 + 1)


def mask_iou(a: Mask, b: Mask) -> float:
    """Intersection over union in [0, 1]; two empty masks count as identical (1.0)."""
    _check_same_dims(a, b, "mask_iou")
    if a.is_empty and b.is_empty:
        return 1.0
    ga, gb = rle_decode(a), rle_decode(b)
    union = int(np.count_nonzero(ga | gb))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(ga & gb))
    return inter / union


def dilate_mask(mask: Mask, radius: int) -> Mask:
    """Morphological dilation by a (2r+1) x (2r+1) square element, clipped to bounds."""
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0 or mask.is_empty:
        return mask
    grid = rle_decode(mask).astype(np.uint8)
    size = 2 * radius + 1
    dilated = ndimage.maximum_filter(grid, size=size, mode="constant", cval=0)
    return rle_encode(dilated)


def composite(
    original: ImageBuffer,
    generated: ImageBuffer,
    mask: Mask,
    feather_radius: int = 0,
) -> ImageBuffer:
    """Blend generated pixels into the original over the mask region.

    Pixels outside the mask always come from the original, bit-exact.
    Inside the mask, the generated weight ramps linearly with the
    Chebyshev distance to the mask boundary: alpha = min(1, d / feather),
    so a feather of 0 is a hard switch to the generated image.
    """
    if (original.width, original.height) != (generated.width, generated.height):
        raise DimensionMismatchError(
            f"composite: {original.width}x{original.height} vs "
            f"{generated.width}x{generated.height}"
        )
    if (original.width, original.height) != (mask.width, mask.height):
        raise DimensionMismatchError(
            f"composite: image {original.width}x{original.height} vs "
            f"mask {mask.width}x{mask.height}"
        )
    if int(feather_radius) < 0:
        raise ValueError(f"feather_radius must be >= 0, got {feather_radius}")
    if mask.is_empty:
        return original
    if mask.area == mask.width * mask.height:
        return generated

    inside = rle_decode(mask)
    if feather_radius == 0:
        out = np.where(inside[:, :, None], generated.pixels, original.pixels)
        return ImageBuffer(out)

    # chessboard distance to the nearest outside pixel (1 at the inner edge)
    depth = ndimage.distance_transform_cdt(inside, metric="chessboard")
    alpha = np.minimum(depth / float(feather_radius), 1.0)[:, :, None]
    blended = np.rint(
        alpha * generated.pixels.astype(np.float64)
        + (1.0 - alpha) * original.pixels.astype(np.float64)
    ).astype(np.uint8)
    # pin the exact cases so float rounding can never leak across them
    out = np.where(alpha == 0.0, original.pixels, blended)
    out = np.where(alpha == 1.0, generated.pixels, out)
    return ImageBuffer(out)


@dataclass(frozen=True)
class Segment:
    """A mask plus segmenter metadata.

    area must equal the mask's pixel count and bbox must be the tight
    bounding box of the mask; use from_mask() to compute both.
    """

    mask: Mask
    area: int
    bbox: tuple[int, int, int, int]
    backend_score: float
    segment_id: str

    def __post_init__(self):
        if self.mask.is_empty:
            raise ValueError("segment mask must be non-empty")
        if self.area != self.mask.area:
            raise ValueError(
                f"area {self.area} != mask pixel count {self.mask.area}"
            )
        bbox = tuple(int(v) for v in self.bbox)
        object.__setattr__(self, "bbox", bbox)
        if bbox != mask_bbox(self.mask):
            raise ValueError(f"bbox {bbox} is not tight for the mask")
        if not (0.0 <= self.backend_score <= 1.0):
            raise ValueError(f"backend_score {self.backend_score} outside [0, 1]")
        if not self.segment_id:
            raise ValueError("segment_id must be non-empty")

    @classmethod
    def from_mask(cls, mask: Mask, backend_score: float, segment_id: str) -> "Segment":
        bbox = mask_bbox(mask)
        if bbox is None:
            raise ValueError("segment mask must be non-empty")
        return cls(mask, mask.area, bbox, backend_score, segment_id)

    def to_json(self) -> dict:
        return {
            "mask": self.mask.to_json(),
            "area": self.area,
            "bbox": list(self.bbox),
            "backend_score": self.backend_score,
            "segment_id": self.segment_id,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Segment":
        try:
            return cls(
                mask=Mask.from_json(obj["mask"]),
                area=int(obj["area"]),
                bbox=tuple(int(v) for v in obj["bbox"]),
                backend_score=float(obj["backend_score"]),
                segment_id=str(obj["segment_id"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad segment JSON: {exc}") from exc
