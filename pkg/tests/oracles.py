"""Independent reference implementations the tests compare against.

Everything here is written as plainly as possible (Python loops, scalar
colorsys) and never calls into the library's own algebra, so agreement
is evidence of correctness rather than self-confirmation.
"""

from __future__ import annotations

import colorsys
import math

import numpy as np


def rle_runs(flat_bools) -> list[tuple[int, int]]:
    """Run-length encode a flat boolean sequence by linear scan."""
    runs = []
    start = None
    for i, v in enumerate(flat_bools):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(flat_bools) - start))
    return runs


def decode_runs(width: int, height: int, runs) -> np.ndarray:
    grid = np.zeros(width * height, bool)
    for start, length in runs:
        grid[start : start + length] = True
    return grid.reshape(height, width)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.logical_and(a, b).sum())
    union = int(np.logical_or(a, b).sum())
    return 1.0 if union == 0 else inter / union


def bbox(grid: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x0, y0, x1, y1) box, x1/y1 exclusive."""
    ys, xs = np.nonzero(grid)
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def chebyshev_dilate(grid: np.ndarray, radius: int) -> np.ndarray:
    """True where any mask pixel lies within Chebyshev distance radius."""
    h, w = grid.shape
    out = np.zeros_like(grid)
    ys, xs = np.nonzero(grid)
    for y, x in zip(ys, xs):
        y0, y1 = max(0, y - radius), min(h, y + radius + 1)
        x0, x1 = max(0, x - radius), min(w, x + radius + 1)
        out[y0:y1, x0:x1] = True
    return out


def feather_alpha(inside: np.ndarray, feather: int) -> np.ndarray:
    """Per-pixel blend weight: Chebyshev depth to the nearest outside
    pixel, ramped linearly over the feather radius. Outside pixels get 0;
    with no outside pixel anywhere the depth is infinite."""
    h, w = inside.shape
    outside = ~inside
    alpha = np.zeros((h, w), float)
    oy, ox = np.nonzero(outside)
    for y in range(h):
        for x in range(w):
            if not inside[y, x]:
                continue
            if len(oy) == 0:
                alpha[y, x] = 1.0
                continue
            depth = int(np.max(np.stack([np.abs(oy - y), np.abs(ox - x)]), axis=0).min())
            alpha[y, x] = min(1.0, depth / float(feather))
    return alpha


def composite_pixels(
    original: np.ndarray, generated: np.ndarray, inside: np.ndarray, feather: int
) -> np.ndarray:
    if feather == 0:
        out = original.copy()
        out[inside] = generated[inside]
        return out
    alpha = feather_alpha(inside, feather)
    out = original.copy()
    for y in range(inside.shape[0]):
        for x in range(inside.shape[1]):
            a = alpha[y, x]
            if a == 0.0:
                continue
            if a == 1.0:
                out[y, x] = generated[y, x]
                continue
            for c in range(3):
                out[y, x, c] = int(
                    np.rint(
                        a * float(generated[y, x, c])
                        + (1.0 - a) * float(original[y, x, c])
                    )
                )
    return out


def classify_color(r: int, g: int, b: int) -> str:
    """Scalar color naming over HSV: value extremes first, then
    saturation, then fixed hue bands."""
    hue, sat, val = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
    if val < 0.20:
        return "black"
    if sat < 0.25:
        return "white" if val >= 0.80 else "gray"
    deg = hue * 360.0
    if deg < 15 or deg >= 345:
        return "red"
    if deg < 45:
        return "orange"
    if deg < 75:
        return "yellow"
    if deg < 165:
        return "green"
    if deg < 195:
        return "cyan"
    if deg < 255:
        return "blue"
    return "purple"


def flood_fill_components(grid: np.ndarray) -> list[np.ndarray]:
    """4-connected components of a boolean grid via explicit BFS."""
    h, w = grid.shape
    seen = np.zeros_like(grid)
    components = []
    for sy in range(h):
        for sx in range(w):
            if not grid[sy, sx] or seen[sy, sx]:
                continue
            comp = np.zeros_like(grid)
            queue = [(sy, sx)]
            seen[sy, sx] = True
            while queue:
                y, x = queue.pop()
                comp[y, x] = True
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and grid[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            components.append(comp)
    return components


def softmax(values, temperature: float = 1.0) -> list[float]:
    scaled = [v / temperature for v in values]
    peak = max(scaled)
    exps = [math.exp(v - peak) for v in scaled]
    total = sum(exps)
    return [e / total for e in exps]
