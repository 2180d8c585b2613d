import numpy as np
import pytest

import oracles
from conftest import mask_from_grid, random_image
from segedit import (
    ImageBuffer,
    Mask,
    ReferenceInpainter,
    ReferenceScorer,
    ReferenceSegmenter,
    default_registry,
    load_registry,
    reference_stack,
    rle_decode,
)
from segedit.backends import COLOR_LEXICON, EmptyCropsError, classify_colors


# ---------------------------------------------------------------------------
# Color classification
# ---------------------------------------------------------------------------

def test_classify_matches_scalar_colorsys_oracle():
    rng = np.random.default_rng(31)
    px = rng.integers(0, 256, (40, 40, 3), dtype=np.uint8)
    names = classify_colors(ImageBuffer(px).pixels)
    for y in range(40):
        for x in range(40):
            want = oracles.classify_color(*px[y, x])
            assert names[y, x] == want, (px[y, x], names[y, x], want)


def test_every_lexicon_fill_classifies_as_itself():
    for name, rgb in COLOR_LEXICON.items():
        px = np.full((2, 2, 3), rgb, np.uint8)
        assert np.all(classify_colors(px) == name), (name, rgb)


# ---------------------------------------------------------------------------
# Reference segmenter
# ---------------------------------------------------------------------------

def test_segments_are_components_of_flood_fill_oracle(red_disk):
    image, disk = red_disk
    segments = ReferenceSegmenter().segment(image)
    # white background and red disk, both above the area floor
    assert len(segments) == 2
    grids = [rle_decode(s.mask) for s in segments]
    oracle_comps = oracles.flood_fill_components(disk) + oracles.flood_fill_components(
        ~disk
    )
    for grid in grids:
        assert any(np.array_equal(grid, comp) for comp in oracle_comps)


def test_segmenter_invariants_random_images():
    rng = np.random.default_rng(33)
    seg = ReferenceSegmenter()
    for _ in range(10):
        # blocky images so components clear the area floor
        small = rng.integers(0, 3, (8, 8, 3), dtype=np.uint8) * 100
        big = np.kron(small, np.ones((6, 6, 1), np.uint8))
        image = ImageBuffer(big)
        segments = seg.segment(image)
        assert segments, "blocky image must yield segments"
        total = np.zeros((image.height, image.width), bool)
        for s in segments:
            grid = rle_decode(s.mask)
            assert not np.any(total & grid), "segments must be disjoint"
            total |= grid
            assert (s.mask.width, s.mask.height) == (image.width, image.height)
            assert 0.0 <= s.backend_score <= 1.0
        ids = [s.segment_id for s in segments]
        assert len(set(ids)) == len(ids)
        areas = [s.area for s in segments]
        assert areas == sorted(areas, reverse=True)


def test_segmenter_deterministic(red_disk):
    image, _ = red_disk
    seg = ReferenceSegmenter()
    assert seg.segment(image) == seg.segment(image)


def test_segmenter_min_area_floor():
    px = np.full((50, 50, 3), 255, np.uint8)
    px[0, 0] = (255, 0, 0)  # single stray pixel, below min area
    segments = ReferenceSegmenter(min_area_fraction=0.01).segment(ImageBuffer(px))
    assert all(s.area >= 25 for s in segments)
    assert len(segments) == 1


# ---------------------------------------------------------------------------
# Reference scorer
# ---------------------------------------------------------------------------

def test_scorer_color_fraction_oracle():
    rng = np.random.default_rng(35)
    scorer = ReferenceScorer()
    for _ in range(20):
        crop = random_image(rng, 12, 12)
        names = np.array(
            [
                [oracles.classify_color(*crop.pixels[y, x]) for x in range(12)]
                for y in range(12)
            ]
        )
        for color in ("red", "blue", "gray"):
            frac = float(np.mean(names == color))
            got = scorer.score([crop], f"the {color} thing")[0]
            assert got == pytest.approx(frac, abs=1e-12)


def test_scorer_sums_lexicon_tokens():
    scorer = ReferenceScorer()
    px = np.zeros((4, 4, 3), np.uint8)
    px[:2] = (255, 0, 0)
    px[2:] = (0, 0, 255)
    crop = ImageBuffer(px)
    assert scorer.score([crop], "red")[0] == pytest.approx(0.5)
    assert scorer.score([crop], "red blue")[0] == pytest.approx(1.0)
    assert scorer.score([crop], "no color words")[0] == 0.0


def test_scorer_case_and_order_insensitive_over_tokens(red_disk):
    image, _ = red_disk
    scorer = ReferenceScorer()
    a = scorer.score([image], "Red Circle")
    b = scorer.score([image], "circle red")
    assert a == b


def test_scorer_rejects_empty_crop_list():
    with pytest.raises(EmptyCropsError):
        ReferenceScorer().score([], "red")


# ---------------------------------------------------------------------------
# Reference inpainter
# ---------------------------------------------------------------------------

def test_inpaint_lexicon_fill(red_disk):
    image, disk = red_disk
    mask = mask_from_grid(disk)
    out = ReferenceInpainter().inpaint(image, mask, "blue", seed=0)
    assert np.all(out.pixels[disk] == (0, 0, 255))
    assert np.array_equal(out.pixels[~disk], image.pixels[~disk])


def test_inpaint_first_lexicon_token_wins(red_disk):
    image, disk = red_disk
    mask = mask_from_grid(disk)
    out = ReferenceInpainter().inpaint(image, mask, "a green and blue thing", 0)
    assert np.all(out.pixels[disk] == COLOR_LEXICON["green"])


def test_inpaint_ring_mean_for_unknown_prompt(red_disk):
    image, disk = red_disk
    mask = mask_from_grid(disk)
    out = ReferenceInpainter().inpaint(image, mask, "a dragon", seed=3)
    # disk is surrounded by white, so the ring mean is white
    assert np.all(out.pixels[disk] == (255, 255, 255))
    assert np.array_equal(out.pixels[~disk], image.pixels[~disk])


def test_inpaint_empty_mask_is_identity(red_disk):
    image, _ = red_disk
    out = ReferenceInpainter().inpaint(
        image, Mask.empty(image.width, image.height), "blue", 0
    )
    assert out == image


def test_inpaint_deterministic_in_seed(red_disk):
    image, disk = red_disk
    mask = mask_from_grid(disk)
    inp = ReferenceInpainter()
    a = inp.inpaint(image, mask, "a dragon", 1)
    b = inp.inpaint(image, mask, "a dragon", 99)
    assert a == b  # reference backend ignores the seed by design


# ---------------------------------------------------------------------------
# Stack and registry
# ---------------------------------------------------------------------------

def test_reference_stack_describe():
    desc = reference_stack().describe()
    assert desc["stack_id"] == "reference"
    assert desc["segmenter"]["name"] == "reference-quantize-4"
    assert desc["scorer"]["languages"] == ["en"]
    assert desc["inpainter"]["deterministic"] is True


def test_default_registry_has_reference():
    registry = default_registry()
    assert "reference" in registry


def test_load_registry_reference_components():
    registry = load_registry(
        [
            {
                "stack_id": "custom",
                "segmenter": {"kind": "reference", "quant_levels": 2},
                "scorer": {"kind": "reference"},
                "inpainter": {"kind": "reference"},
            }
        ]
    )
    assert set(registry) == {"custom"}
    assert registry["custom"].segmenter.info.name == "reference-quantize-2"


def test_load_registry_rejects_unknown_kind():
    with pytest.raises(ValueError):
        load_registry(
            [
                {
                    "stack_id": "x",
                    "segmenter": {"kind": "mystery"},
                    "scorer": {"kind": "reference"},
                    "inpainter": {"kind": "reference"},
                }
            ]
        )
