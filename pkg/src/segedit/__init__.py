"""Text-guided region editing: segment an image, rank the segments against
a source prompt, and inpaint the winning region from a target prompt."""

from segedit.core import (
    DimensionMismatchError,
    ImageBuffer,
    MalformedMaskError,
    Mask,
    SegeditError,
    Segment,
    composite,
    dilate_mask,
    mask_bbox,
    mask_iou,
    rle_decode,
    rle_encode,
)
from segedit.backends import (
    BackendStack,
    Inpainter,
    ReferenceInpainter,
    ReferenceScorer,
    ReferenceSegmenter,
    Scorer,
    Segmenter,
    default_registry,
    load_registry,
    reference_stack,
    remote_adapter,
)
from segedit.ranking import (
    CropSpec,
    RankedSegment,
    Selection,
    normalize_scores,
    prepare_crop,
    rank_segments,
    select_target,
)
from segedit.pipeline import (
    EditInstruction,
    EditSession,
    EditStep,
    PipelineConfig,
    ScriptSyntaxError,
    StepStatus,
    edit_once,
    parse_instructions,
    render_script,
    run_session,
    undo,
)
from segedit.store import SessionStore

__version__ = "0.1.0"

__all__ = [
    "BackendStack",
    "CropSpec",
    "DimensionMismatchError",
    "EditInstruction",
    "EditSession",
    "EditStep",
    "ImageBuffer",
    "Inpainter",
    "MalformedMaskError",
    "Mask",
    "PipelineConfig",
    "RankedSegment",
    "ReferenceInpainter",
    "ReferenceScorer",
    "ReferenceSegmenter",
    "Scorer",
    "ScriptSyntaxError",
    "SegeditError",
    "Segment",
    "Segmenter",
    "Selection",
    "SessionStore",
    "StepStatus",
    "composite",
    "default_registry",
    "dilate_mask",
    "edit_once",
    "load_registry",
    "mask_bbox",
    "mask_iou",
    "normalize_scores",
    "parse_instructions",
    "prepare_crop",
    "rank_segments",
    "reference_stack",
    "remote_adapter",
    "render_script",
    "rle_decode",
    "rle_encode",
    "run_session",
    "select_target",
    "undo",
    "__version__",
]
