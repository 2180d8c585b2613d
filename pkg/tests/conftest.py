import numpy as np
import pytest

from segedit import ImageBuffer, Mask


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.write_sep("-", "acceptance scorecard")
        for name, status in RESULTS.items():
            terminalreporter.write_line(f"[ACCEPT] {name}: {status}")


def disk_grid(h: int, w: int, cy: int, cx: int, r: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


@pytest.fixture
def red_disk():
    """64x64 white canvas with a red disk; returns (image, disk predicate)."""
    disk = disk_grid(64, 64, 32, 32, 14)
    px = np.full((64, 64, 3), 255, np.uint8)
    px[disk] = (255, 0, 0)
    return ImageBuffer(px), disk


@pytest.fixture
def two_disks():
    """96x64 white canvas with a red disk left and a green disk right."""
    red = disk_grid(64, 96, 32, 24, 12)
    green = disk_grid(64, 96, 32, 72, 12)
    px = np.full((64, 96, 3), 255, np.uint8)
    px[red] = (255, 0, 0)
    px[green] = (0, 128, 0)
    return ImageBuffer(px), red, green


def random_mask(rng: np.random.Generator, width: int, height: int) -> Mask:
    density = rng.uniform(0.05, 0.95)
    grid = rng.random((height, width)) < density
    return mask_from_grid(grid)


def mask_from_grid(grid: np.ndarray) -> Mask:
    flat = np.asarray(grid, bool).ravel()
    runs = []
    start = None
    for i, v in enumerate(flat):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, flat.size - start))
    return Mask.from_runs(grid.shape[1], grid.shape[0], runs)


def random_image(rng: np.random.Generator, width: int, height: int) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))
