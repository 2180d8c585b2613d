"""Model-role contracts, deterministic reference backends, and remote adapters.

Three roles make up a stack: a segmenter proposes regions, a scorer rates
image crops against a text prompt, and an inpainter regenerates a masked
region from a prompt. The reference implementations are pure functions of
their inputs (no models, no GPU) so the whole pipeline is testable; remote
adapters forward the same contracts to external model servers over
HTTP/JSON and validate every response before returning it.
"""

from __future__ import annotations

import base64
import json
import os
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests
from scipy import ndimage

from segedit.core import (
    ImageBuffer,
    MalformedMaskError,
    Mask,
    SegeditError,
    Segment,
    dilate_mask,
    rle_decode,
    rle_encode,
)


class BackendError(SegeditError):
    """Base class for backend failures."""


class EmptyCropsError(BackendError):
    """Scorer called with no crops."""


class RemoteBackendError(BackendError):
    """Base for remote-adapter failures; carries endpoint and role."""

    def __init__(self, message: str, endpoint: str, role: str):
        super().__init__(f"{role} at {endpoint}: {message}")
        self.endpoint = endpoint
        self.role = role


class BackendConnectionError(RemoteBackendError):
    pass


class BackendTimeoutError(RemoteBackendError):
    pass


class ProtocolViolationError(RemoteBackendError):
    """Server response violates the role's contract."""


# ---------------------------------------------------------------------------
# Contracts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmenterInfo:
    name: str
    max_image_side: int = 0  # 0 = unlimited
    supports_overlapping_masks: bool = False


@dataclass(frozen=True)
class ScorerInfo:
    name: str
    score_range: str = "unit"  # "unit" for [0,1]-ish scores, "raw-logit" otherwise
    languages: tuple[str, ...] = ()
    max_image_side: int = 0  # crops larger than this are downscaled before scoring


@dataclass(frozen=True)
class InpainterInfo:
    name: str
    native_resolution: int = 0
    deterministic: bool = False
    accepts_seed: bool = True


class Segmenter(ABC):
    info: SegmenterInfo

    @abstractmethod
    def segment(self, image: ImageBuffer) -> list[Segment]:
        """Propose zero or more segments, each mask within image bounds."""


class Scorer(ABC):
    info: ScorerInfo

    @abstractmethod
    def score(self, crops: Sequence[ImageBuffer], prompt: str) -> list[float]:
        """Return exactly one finite score per crop; deterministic per input."""


class Inpainter(ABC):
    info: InpainterInfo

    @abstractmethod
    def inpaint(
        self, image: ImageBuffer, mask: Mask, prompt: str, seed: int
    ) -> ImageBuffer:
        """Regenerate the masked region; output dimensions equal the input's."""


@dataclass(frozen=True)
class BackendStack:
    stack_id: str
    segmenter: Segmenter
    scorer: Scorer
    inpainter: Inpainter

    def __post_init__(self):
        if not self.stack_id:
            raise ValueError("stack_id must be non-empty")

    def describe(self) -> dict:
        return {
            "stack_id": self.stack_id,
            "segmenter": {
                "name": self.segmenter.info.name,
                "max_image_side": self.segmenter.info.max_image_side,
                "supports_overlapping_masks": self.segmenter.info.supports_overlapping_masks,
            },
            "scorer": {
                "name": self.scorer.info.name,
                "score_range": self.scorer.info.score_range,
                "languages": list(self.scorer.info.languages),
                "max_image_side": self.scorer.info.max_image_side,
            },
            "inpainter": {
                "name": self.inpainter.info.name,
                "native_resolution": self.inpainter.info.native_resolution,
                "deterministic": self.inpainter.info.deterministic,
                "accepts_seed": self.inpainter.info.accepts_seed,
            },
        }


# ---------------------------------------------------------------------------
# Color lexicon shared by the reference scorer and inpainter
# ---------------------------------------------------------------------------

# fill RGB for each lexicon color
COLOR_LEXICON: dict[str, tuple[int, int, int]] = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
    "orange": (255, 165, 0),
    "purple": (128, 0, 128),
    "cyan": (0, 255, 255),
}

# HSV partition: every pixel classifies as exactly one lexicon color.
# Achromatic cuts first (value, then saturation), then hue bands in degrees.
_VAL_BLACK = 0.20
_VAL_WHITE = 0.80
_SAT_CHROMATIC = 0.25
_HUE_BANDS = (
    ("red", 0.0, 15.0),
    ("orange", 15.0, 45.0),
    ("yellow", 45.0, 75.0),
    ("green", 75.0, 165.0),
    ("cyan", 165.0, 195.0),
    ("blue", 195.0, 255.0),
    ("purple", 255.0, 345.0),
    ("red", 345.0, 360.0),
)


def _rgb_to_hsv(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB (uint8) -> (hue degrees [0,360), sat [0,1], val [0,1])."""
    rgb = pixels.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    h = np.zeros_like(v)
    chromatic = c > 0
    safe_c = np.where(chromatic, c, 1.0)
    r_max = chromatic & (v == r)
    g_max = chromatic & (v == g) & ~r_max
    b_max = chromatic & ~r_max & ~g_max
    h = np.where(r_max, ((g - b) / safe_c) % 6.0, h)
    h = np.where(g_max, (b - r) / safe_c + 2.0, h)
    h = np.where(b_max, (r - g) / safe_c + 4.0, h)
    return h * 60.0, s, v


def classify_colors(pixels: np.ndarray) -> np.ndarray:
    """Map (h, w, 3) uint8 pixels to lexicon color names, as an object array."""
    h, s, v = _rgb_to_hsv(pixels)
    names = np.empty(v.shape, dtype=object)
    names[:] = "black"
    lit = v >= _VAL_BLACK
    achromatic = lit & (s < _SAT_CHROMATIC)
    names[achromatic & (v >= _VAL_WHITE)] = "white"
    names[achromatic & (v < _VAL_WHITE)] = "gray"
    chromatic = lit & ~achromatic
    for name, lo, hi in _HUE_BANDS:
        names[chromatic & (h >= lo) & (h < hi)] = name
    return names


def color_fraction(image: ImageBuffer, color: str) -> float:
    """Fraction of pixels classifying as the given lexicon color."""
    if color not in COLOR_LEXICON:
        raise ValueError(f"unknown lexicon color {color!r}")
    names = classify_colors(image.pixels)
    return float(np.count_nonzero(names == color)) / names.size


def _prompt_tokens(prompt: str) -> list[str]:
    return re.findall(r"\w+", prompt.lower())


# ---------------------------------------------------------------------------
# Reference backends
# ---------------------------------------------------------------------------

_CROSS = ndimage.generate_binary_structure(2, 1)  # 4-connectivity


class ReferenceSegmenter(Segmenter):
    """Color-quantization + 4-connected-components segmenter.

    Each channel is quantized to `quant_levels` uniform bins; connected
    components of equal quantized color become segments. Components
    smaller than min_area_fraction of the image are dropped. Output is
    disjoint, sorted by area descending, with backend_score = area fraction.
    """

    def __init__(self, quant_levels: int = 4, min_area_fraction: float = 0.0):
        if quant_levels < 2:
            raise ValueError(f"quant_levels must be >= 2, got {quant_levels}")
        if not (0.0 <= min_area_fraction < 1.0):
            raise ValueError(
                f"min_area_fraction must be in [0, 1), got {min_area_fraction}"
            )
        self.quant_levels = int(quant_levels)
        self.min_area_fraction = float(min_area_fraction)
        self.info = SegmenterInfo(
            name=f"reference-quantize-{quant_levels}",
            max_image_side=0,
            supports_overlapping_masks=False,
        )

    def segment(self, image: ImageBuffer) -> list[Segment]:
        levels = self.quant_levels
        q = (image.pixels.astype(np.int64) * levels) // 256
        keys = (q[:, :, 0] * levels + q[:, :, 1]) * levels + q[:, :, 2]
        total = image.width * image.height
        min_area = self.min_area_fraction * total

        components: list[tuple[int, int, np.ndarray]] = []  # (area, first_idx, grid)
        for key in np.unique(keys):
            labeled, count = ndimage.label(keys == key, structure=_CROSS)
            for lab in range(1, count + 1):
                grid = labeled == lab
                area = int(np.count_nonzero(grid))
                if area < min_area:
                    continue
                first_idx = int(np.flatnonzero(grid.ravel())[0])
                components.append((area, first_idx, grid))

        components.sort(key=lambda c: (-c[0], c[1]))
        segments = []
        for i, (area, _, grid) in enumerate(components):
            segments.append(
                Segment.from_mask(
                    rle_encode(grid),
                    backend_score=area / total,
                    segment_id=f"seg{i:03d}",
                )
            )
        return segments


class ReferenceScorer(Scorer):
    """Lexical-visual scorer: each prompt token naming a lexicon color adds
    the fraction of crop pixels classifying as that color. Tokens outside
    the lexicon contribute nothing, so scores lie in [0, n_color_tokens]."""

    def __init__(self):
        self.info = ScorerInfo(
            name="reference-color-lexicon",
            score_range="unit",
            languages=("en",),
            max_image_side=0,
        )

    def score(self, crops: Sequence[ImageBuffer], prompt: str) -> list[float]:
        if not crops:
            raise EmptyCropsError("score() requires at least one crop")
        color_tokens = [t for t in _prompt_tokens(prompt) if t in COLOR_LEXICON]
        scores = []
        for crop in crops:
            names = classify_colors(crop.pixels)
            s = 0.0
            for token in color_tokens:
                s += float(np.count_nonzero(names == token)) / names.size
            scores.append(s)
        return scores


class ReferenceInpainter(Inpainter):
    """Fills the masked region with the first lexicon color named in the
    prompt, or with the mean color of the 1-pixel ring just outside the
    mask when the prompt names none. Deterministic; the seed is ignored."""

    def __init__(self):
        self.info = InpainterInfo(
            name="reference-color-fill",
            native_resolution=0,
            deterministic=True,
            accepts_seed=False,
        )

    def inpaint(
        self, image: ImageBuffer, mask: Mask, prompt: str, seed: int
    ) -> ImageBuffer:
        if (mask.width, mask.height) != (image.width, image.height):
            raise BackendError(
                f"mask {mask.width}x{mask.height} does not fit image "
                f"{image.width}x{image.height}"
            )
        if mask.is_empty:
            return image
        fill = None
        for token in _prompt_tokens(prompt):
            if token in COLOR_LEXICON:
                fill = COLOR_LEXICON[token]
                break
        inside = rle_decode(mask)
        if fill is None:
            ring = rle_decode(dilate_mask(mask, 1)) & ~inside
            if np.any(ring):
                fill = tuple(
                    int(v) for v in np.rint(image.pixels[ring].mean(axis=0))
                )
            else:
                fill = (128, 128, 128)  # mask covers the whole grid
        out = image.pixels.copy()
        out[inside] = fill
        return ImageBuffer(out)


def reference_stack(
    stack_id: str = "reference",
    quant_levels: int = 4,
    min_area_fraction: float = 0.0,
) -> BackendStack:
    return BackendStack(
        stack_id=stack_id,
        segmenter=ReferenceSegmenter(quant_levels, min_area_fraction),
        scorer=ReferenceScorer(),
        inpainter=ReferenceInpainter(),
    )


# ---------------------------------------------------------------------------
# Remote adapters (HTTP/JSON wire protocol)
# ---------------------------------------------------------------------------

def _png_b64(image: ImageBuffer) -> str:
    return base64.b64encode(image.to_png_bytes()).decode("ascii")


def _image_from_b64(data: str, endpoint: str, role: str) -> ImageBuffer:
    try:
        return ImageBuffer.from_png_bytes(base64.b64decode(data))
    except Exception as exc:
        raise ProtocolViolationError(
            f"undecodable image payload: {exc}", endpoint, role
        ) from exc


class _RemoteCall:
    """Shared HTTP plumbing for one remote role."""

    def __init__(self, endpoint: str, role: str, timeout: float):
        self.endpoint = endpoint.rstrip("/")
        self.role = role
        self.timeout = float(timeout)

    def _wrap(self, exc: Exception) -> RemoteBackendError:
        if isinstance(exc, requests.Timeout):
            return BackendTimeoutError(
                f"no response within {self.timeout}s", self.endpoint, self.role
            )
        return BackendConnectionError(str(exc), self.endpoint, self.role)

    def get_json(self, path: str) -> dict:
        try:
            resp = requests.get(self.endpoint + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise self._wrap(exc) from exc
        return self._decode(resp)

    def post_json(self, path: str, body: dict) -> dict:
        try:
            resp = requests.post(self.endpoint + path, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise self._wrap(exc) from exc
        return self._decode(resp)

    def _decode(self, resp: requests.Response) -> dict:
        if resp.status_code != 200:
            raise ProtocolViolationError(
                f"HTTP {resp.status_code}: {resp.text[:200]}",
                self.endpoint,
                self.role,
            )
        try:
            obj = resp.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ProtocolViolationError(
                f"response is not JSON: {exc}", self.endpoint, self.role
            ) from exc
        if not isinstance(obj, dict):
            raise ProtocolViolationError(
                "response is not a JSON object", self.endpoint, self.role
            )
        return obj

    def health(self) -> dict:
        info = self.get_json("/health")
        if info.get("role") != self.role:
            raise ProtocolViolationError(
                f"health probe reports role {info.get('role')!r}, expected "
                f"{self.role!r}",
                self.endpoint,
                self.role,
            )
        return info


class RemoteSegmenter(Segmenter):
    def __init__(self, endpoint: str, timeout: float = 30.0, params: dict | None = None):
        self._call = _RemoteCall(endpoint, "segmenter", timeout)
        self.params = dict(params or {})
        health = self._call.health()
        self.info = SegmenterInfo(
            name=str(health.get("name", "remote-segmenter")),
            max_image_side=int(health.get("max_image_side", 0)),
            supports_overlapping_masks=bool(
                health.get("supports_overlapping_masks", True)
            ),
        )

    def segment(self, image: ImageBuffer) -> list[Segment]:
        obj = self._call.post_json(
            "/segment", {"image": _png_b64(image), "params": self.params}
        )
        raw = obj.get("segments")
        if not isinstance(raw, list):
            raise ProtocolViolationError(
                "missing 'segments' list", self._call.endpoint, "segmenter"
            )
        segments = []
        for entry in raw:
            try:
                seg = Segment.from_json(entry)
            except (ValueError, MalformedMaskError, AttributeError) as exc:
                raise ProtocolViolationError(
                    f"invalid segment: {exc}", self._call.endpoint, "segmenter"
                ) from exc
            if (seg.mask.width, seg.mask.height) != (image.width, image.height):
                raise ProtocolViolationError(
                    f"segment mask {seg.mask.width}x{seg.mask.height} does not "
                    f"match image {image.width}x{image.height}",
                    self._call.endpoint,
                    "segmenter",
                )
            segments.append(seg)
        return segments


class RemoteScorer(Scorer):
    def __init__(self, endpoint: str, timeout: float = 30.0):
        self._call = _RemoteCall(endpoint, "scorer", timeout)
        health = self._call.health()
        self.info = ScorerInfo(
            name=str(health.get("name", "remote-scorer")),
            score_range=str(health.get("score_range", "raw-logit")),
            languages=tuple(health.get("languages", ())),
            max_image_side=int(health.get("max_image_side", 0)),
        )

    def score(self, crops: Sequence[ImageBuffer], prompt: str) -> list[float]:
        if not crops:
            raise EmptyCropsError("score() requires at least one crop")
        obj = self._call.post_json(
            "/score", {"crops": [_png_b64(c) for c in crops], "prompt": prompt}
        )
        scores = obj.get("scores")
        if not isinstance(scores, list) or len(scores) != len(crops):
            got = len(scores) if isinstance(scores, list) else "none"
            raise ProtocolViolationError(
                f"expected {len(crops)} scores, got {got}",
                self._call.endpoint,
                "scorer",
            )
        out = []
        for s in scores:
            if not isinstance(s, (int, float)) or not np.isfinite(s):
                raise ProtocolViolationError(
                    f"non-finite score {s!r}", self._call.endpoint, "scorer"
                )
            out.append(float(s))
        return out


class RemoteInpainter(Inpainter):
    def __init__(self, endpoint: str, timeout: float = 120.0):
        self._call = _RemoteCall(endpoint, "inpainter", timeout)
        health = self._call.health()
        self.info = InpainterInfo(
            name=str(health.get("name", "remote-inpainter")),
            native_resolution=int(health.get("native_resolution", 512)),
            deterministic=bool(health.get("deterministic", False)),
            accepts_seed=bool(health.get("accepts_seed", True)),
        )

    def inpaint(
        self, image: ImageBuffer, mask: Mask, prompt: str, seed: int
    ) -> ImageBuffer:
        obj = self._call.post_json(
            "/inpaint",
            {
                "image": _png_b64(image),
                "mask": mask.to_json(),
                "prompt": prompt,
                "seed": int(seed),
            },
        )
        if "image" not in obj:
            raise ProtocolViolationError(
                "missing 'image' in response", self._call.endpoint, "inpainter"
            )
        out = _image_from_b64(obj["image"], self._call.endpoint, "inpainter")
        if (out.width, out.height) != (image.width, image.height):
            raise ProtocolViolationError(
                f"inpaint returned {out.width}x{out.height} for a "
                f"{image.width}x{image.height} input",
                self._call.endpoint,
                "inpainter",
            )
        return out


_REMOTE_ROLES = {
    "segmenter": RemoteSegmenter,
    "scorer": RemoteScorer,
    "inpainter": RemoteInpainter,
}


def remote_adapter(endpoint: str, role: str, timeout: float = 30.0, **kwargs):
    """Build a contract instance forwarding to a model server. The health
    probe runs at construction and fails fast on unreachable endpoints or
    role mismatches."""
    if role not in _REMOTE_ROLES:
        raise ValueError(f"unknown role {role!r}")
    return _REMOTE_ROLES[role](endpoint, timeout=timeout, **kwargs)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def default_registry() -> dict[str, BackendStack]:
    return {"reference": reference_stack()}


def _build_component(role: str, cfg: dict):
    kind = cfg.get("kind", "reference")
    if kind == "reference":
        if role == "segmenter":
            return ReferenceSegmenter(
                quant_levels=int(cfg.get("quant_levels", 4)),
                min_area_fraction=float(cfg.get("min_area_fraction", 0.0)),
            )
        if role == "scorer":
            return ReferenceScorer()
        return ReferenceInpainter()
    if kind == "remote":
        endpoint = cfg.get("endpoint")
        if not endpoint:
            raise ValueError(f"remote {role} config needs an 'endpoint'")
        kwargs = {"timeout": float(cfg.get("timeout", 30.0))}
        if role == "segmenter" and "params" in cfg:
            kwargs["params"] = cfg["params"]
        return remote_adapter(endpoint, role, **kwargs)
    raise ValueError(f"unknown backend kind {kind!r} for {role}")


def load_registry(source) -> dict[str, BackendStack]:
    """Load a backend registry config: a JSON list of stack entries, each
    {stack_id, segmenter: {kind, ...}, scorer: {...}, inpainter: {...}}.
    Accepts a file path or an already-parsed list."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            entries = json.load(fh)
    else:
        entries = source
    if not isinstance(entries, list):
        raise ValueError("registry config must be a JSON list")
    registry: dict[str, BackendStack] = {}
    for entry in entries:
        stack_id = entry.get("stack_id")
        if not stack_id:
            raise ValueError("registry entry missing stack_id")
        if stack_id in registry:
            raise ValueError(f"duplicate stack_id {stack_id!r}")
        registry[stack_id] = BackendStack(
            stack_id=stack_id,
            segmenter=_build_component("segmenter", entry.get("segmenter", {})),
            scorer=_build_component("scorer", entry.get("scorer", {})),
            inpainter=_build_component("inpainter", entry.get("inpainter", {})),
        )
    return registry
