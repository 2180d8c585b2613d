"""Segment selection: crop preparation, scoring, normalization, thresholding.

Given segments and a source prompt, each segment is presented to the
scorer as a padded crop, raw scores are softmax-normalized into relative
confidences, and the top-ranked segment is selected if it clears the
no-match threshold. Ties break on larger area, then smaller segment_id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from PIL import Image

from segedit.backends import Scorer
from segedit.core import ImageBuffer, SegeditError, Segment, rle_decode

BLANK_FILL = (128, 128, 128)


class RankingError(SegeditError):
    """Base class for ranking failures."""


class EmptySegmentsError(RankingError):
    pass


class EmptyPromptError(RankingError):
    pass


class DegenerateBboxError(RankingError):
    pass


class NonFiniteScoreError(RankingError):
    pass


class MalformedRankingError(RankingError):
    pass


@dataclass(frozen=True)
class CropSpec:
    """How a segment is presented to the scorer.

    padding_fraction pads each side of the bbox by that fraction of the
    larger bbox dimension; background_mode "keep" leaves surrounding
    pixels, "blank" fills non-mask pixels with mid-gray.
    """

    padding_fraction: float = 0.15
    background_mode: str = "keep"

    def __post_init__(self):
        if not (0.0 <= self.padding_fraction <= 2.0):
            raise ValueError(
                f"padding_fraction must be in [0, 2], got {self.padding_fraction}"
            )
        if self.background_mode not in ("keep", "blank"):
            raise ValueError(
                f"background_mode must be 'keep' or 'blank', got "
                f"{self.background_mode!r}"
            )


@dataclass(frozen=True)
class RankedSegment:
    segment: Segment
    raw_score: float
    norm_score: float
    rank: int

    def to_json(self) -> dict:
        return {
            "segment": self.segment.to_json(),
            "raw_score": self.raw_score,
            "norm_score": self.norm_score,
            "rank": self.rank,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RankedSegment":
        return cls(
            segment=Segment.from_json(obj["segment"]),
            raw_score=float(obj["raw_score"]),
            norm_score=float(obj["norm_score"]),
            rank=int(obj["rank"]),
        )


@dataclass(frozen=True)
class Selection:
    """Outcome of selecting a target segment from a ranking.

    selected is None on no-match. A selection produced by select_target
    always points at the rank-1 segment with norm_score above threshold;
    overridden=True marks a human override, which may pick any rank.
    """

    selected: RankedSegment | None
    threshold_used: float
    all_ranked: tuple[RankedSegment, ...]
    overridden: bool = False

    def __post_init__(self):
        object.__setattr__(self, "all_ranked", tuple(self.all_ranked))
        if self.selected is not None and not self.overridden:
            if self.selected.rank != 1:
                raise MalformedRankingError(
                    f"non-override selection must have rank 1, got "
                    f"{self.selected.rank}"
                )
            if self.selected.norm_score < self.threshold_used:
                raise MalformedRankingError(
                    f"selected norm_score {self.selected.norm_score} below "
                    f"threshold {self.threshold_used}"
                )

    @property
    def matched(self) -> bool:
        return self.selected is not None

    def to_json(self) -> dict:
        return {
            "outcome": "matched" if self.matched else "no_match",
            "selected_segment_id": (
                self.selected.segment.segment_id if self.matched else None
            ),
            "threshold_used": self.threshold_used,
            "overridden": self.overridden,
            "ranked": [r.to_json() for r in self.all_ranked],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Selection":
        ranked = tuple(RankedSegment.from_json(r) for r in obj["ranked"])
        selected = None
        sid = obj.get("selected_segment_id")
        if obj.get("outcome") == "matched":
            selected = next(
                r for r in ranked if r.segment.segment_id == sid
            )
        return cls(
            selected=selected,
            threshold_used=float(obj["threshold_used"]),
            all_ranked=ranked,
            overridden=bool(obj.get("overridden", False)),
        )


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def prepare_crop(image: ImageBuffer, segment: Segment, spec: CropSpec) -> ImageBuffer:
    """Cut the padded bbox region out of the image, clamped to bounds."""
    x0, y0, x1, y1 = segment.bbox
    bw, bh = x1 - x0, y1 - y0
    if bw <= 0 or bh <= 0:
        raise DegenerateBboxError(f"bbox {segment.bbox} has no area")
    pad = _round_half_up(spec.padding_fraction * max(bw, bh))
    cx0 = max(0, x0 - pad)
    cy0 = max(0, y0 - pad)
    cx1 = min(image.width, x1 + pad)
    cy1 = min(image.height, y1 + pad)
    crop = image.pixels[cy0:cy1, cx0:cx1].copy()
    if spec.background_mode == "blank":
        inside = rle_decode(segment.mask)[cy0:cy1, cx0:cx1]
        crop[~inside] = BLANK_FILL
    return ImageBuffer(crop)


def fit_to_side(image: ImageBuffer, max_side: int) -> ImageBuffer:
    """Bilinear-downscale so the longer side fits max_side (0 = unlimited)."""
    if max_side <= 0 or max(image.width, image.height) <= max_side:
        return image
    scale = max_side / max(image.width, image.height)
    new_w = max(1, int(round(image.width * scale)))
    new_h = max(1, int(round(image.height * scale)))
    resized = Image.fromarray(image.pixels, mode="RGB").resize(
        (new_w, new_h), Image.Resampling.BILINEAR
    )
    return ImageBuffer(np.asarray(resized))


def normalize_scores(raw: Sequence[float], temperature: float = 1.0) -> list[float]:
    """Temperature softmax; preserves argmax and sums to 1."""
    if len(raw) == 0:
        raise ValueError("cannot normalize an empty score list")
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    arr = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteScoreError(f"raw scores must be finite, got {list(raw)}")
    z = arr / temperature
    z -= z.max()
    e = np.exp(z)
    return [float(v) for v in e / e.sum()]


def rank_segments(
    image: ImageBuffer,
    segments: Sequence[Segment],
    source_prompt: str,
    scorer: Scorer,
    spec: CropSpec = CropSpec(),
    temperature: float = 1.0,
) -> list[RankedSegment]:
    """Score every segment's prepared crop against the prompt and rank them.

    Ordered by norm_score descending; ties break by larger area, then
    smaller segment_id. The result is independent of the input order.
    """
    if not segments:
        raise EmptySegmentsError("rank_segments requires at least one segment")
    if not source_prompt.strip():
        raise EmptyPromptError("source prompt is empty")
    crops = [
        fit_to_side(prepare_crop(image, seg, spec), scorer.info.max_image_side)
        for seg in segments
    ]
    try:
        raw = [float(s) for s in scorer.score(crops, source_prompt)]
    except SegeditError:
        raise
    except Exception as exc:
        raise RankingError(
            f"scorer {scorer.info.name!r} failed on {len(segments)} segment "
            f"crops: {exc}"
        ) from exc
    if len(raw) != len(segments):
        raise RankingError(
            f"scorer returned {len(raw)} scores for {len(segments)} segments"
        )
    norm = normalize_scores(raw, temperature)
    order = sorted(
        range(len(segments)),
        key=lambda i: (-norm[i], -segments[i].area, segments[i].segment_id),
    )
    return [
        RankedSegment(
            segment=segments[i],
            raw_score=raw[i],
            norm_score=norm[i],
            rank=pos + 1,
        )
        for pos, i in enumerate(order)
    ]


def _check_ranking(ranked: Sequence[RankedSegment]) -> None:
    if not ranked:
        raise MalformedRankingError("empty ranking")
    ranks = sorted(r.rank for r in ranked)
    if ranks != list(range(1, len(ranked) + 1)):
        raise MalformedRankingError(f"ranks {ranks} are not a permutation of 1..n")
    total = sum(r.norm_score for r in ranked)
    if abs(total - 1.0) > 1e-9:
        raise MalformedRankingError(f"norm_scores sum to {total}, expected 1")
    by_rank = sorted(ranked, key=lambda r: r.rank)
    for a, b in zip(by_rank, by_rank[1:]):
        if a.norm_score < b.norm_score:
            raise MalformedRankingError(
                f"rank {a.rank} has lower norm_score than rank {b.rank}"
            )


def select_target(ranked: Sequence[RankedSegment], threshold: float = 0.0) -> Selection:
    """Pick the rank-1 segment if it clears the threshold, else no-match."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    _check_ranking(ranked)
    top = min(ranked, key=lambda r: r.rank)
    all_ranked = tuple(sorted(ranked, key=lambda r: r.rank))
    if top.norm_score >= threshold:
        return Selection(selected=top, threshold_used=threshold, all_ranked=all_ranked)
    return Selection(selected=None, threshold_used=threshold, all_ranked=all_ranked)
