"""One full edit and iterative sessions, driven by a small instruction script.

A script is a semicolon-separated list of clauses:

    replace <source phrase> with <target phrase>; ...

Keywords are case-insensitive; phrases are one or more word-character
tokens (any UTF-8 word characters, so non-Latin text passes through) and
end at the keyword "with", a semicolon, or end of input. A literal "with"
inside a phrase is written "\\with".

An edit runs segment -> rank -> select -> dilate -> inpaint -> composite.
Sessions apply edits sequentially, each step consuming the previous
step's output, and support undo by truncation.
"""

from __future__ import annotations

import enum
import re
import uuid
from dataclasses import dataclass, field, replace
from typing import Sequence

from segedit.backends import BackendStack
from segedit.core import ImageBuffer, Mask, SegeditError, dilate_mask, composite
from segedit.ranking import (
    CropSpec,
    Selection,
    rank_segments,
    select_target,
)


class PipelineError(SegeditError):
    """Base class for pipeline failures."""


class StageError(PipelineError):
    """A backend failed during one stage of an edit."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


class NoSegmentsError(PipelineError):
    """The segmenter proposed nothing to rank."""

    stage = "segment"


class NoMatchError(PipelineError):
    """No segment cleared the selection threshold."""

    def __init__(self, source_prompt: str, threshold: float):
        super().__init__(
            f"no segment matched {source_prompt!r} at threshold {threshold}"
        )
        self.source_prompt = source_prompt
        self.threshold = threshold


class StepIndexError(PipelineError, IndexError):
    """Undo target outside [0, number of steps]."""


class ScriptSyntaxError(PipelineError):
    """Instruction script rejected, with 1-based line/column position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.reason = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class EditInstruction:
    """One replacement: find what the source prompt describes, repaint it
    from the target prompt."""

    source_prompt: str
    target_prompt: str

    def __post_init__(self):
        if not self.source_prompt.strip():
            raise ValueError("source_prompt is empty")
        if not self.target_prompt.strip():
            raise ValueError("target_prompt is empty")


class StepStatus(str, enum.Enum):
    APPLIED = "applied"
    SKIPPED_NO_MATCH = "skipped_no_match"
    FAILED = "failed"


@dataclass(frozen=True)
class EditStep:
    instruction: EditInstruction
    selection: Selection | None
    dilated_mask: Mask
    output_image: ImageBuffer
    seed: int
    status: StepStatus
    error: str | None = None

    def __post_init__(self):
        if self.status is StepStatus.FAILED and not self.error:
            raise ValueError("failed step must carry an error message")
        if self.status is not StepStatus.FAILED and self.error:
            raise ValueError(f"{self.status.value} step cannot carry an error")
        if self.status is StepStatus.APPLIED:
            if self.selection is None or not self.selection.matched:
                raise ValueError("applied step requires a matched selection")


@dataclass(frozen=True)
class PipelineConfig:
    stack_id: str = "reference"
    crop_spec: CropSpec = field(default_factory=CropSpec)
    temperature: float = 1.0
    threshold: float = 0.0
    dilation_radius: int = 3
    feather_radius: int = 2
    seed: int = 0
    on_no_match: str = "skip"

    def __post_init__(self):
        if not self.stack_id:
            raise ValueError("stack_id must be non-empty")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.dilation_radius < 0:
            raise ValueError(f"dilation_radius must be >= 0, got {self.dilation_radius}")
        if self.feather_radius < 0:
            raise ValueError(f"feather_radius must be >= 0, got {self.feather_radius}")
        if self.on_no_match not in ("skip", "error"):
            raise ValueError(
                f"on_no_match must be 'skip' or 'error', got {self.on_no_match!r}"
            )

    def to_json(self) -> dict:
        return {
            "stack_id": self.stack_id,
            "crop_spec": {
                "padding_fraction": self.crop_spec.padding_fraction,
                "background_mode": self.crop_spec.background_mode,
            },
            "temperature": self.temperature,
            "threshold": self.threshold,
            "dilation_radius": self.dilation_radius,
            "feather_radius": self.feather_radius,
            "seed": self.seed,
            "on_no_match": self.on_no_match,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        known = {
            "stack_id",
            "crop_spec",
            "temperature",
            "threshold",
            "dilation_radius",
            "feather_radius",
            "seed",
            "on_no_match",
        }
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        if "crop_spec" in obj:
            cs = obj["crop_spec"]
            cs_unknown = set(cs) - {"padding_fraction", "background_mode"}
            if cs_unknown:
                raise ValueError(f"unknown crop_spec keys: {sorted(cs_unknown)}")
            kwargs["crop_spec"] = CropSpec(
                padding_fraction=float(cs.get("padding_fraction", 0.15)),
                background_mode=str(cs.get("background_mode", "keep")),
            )
        for key, conv in (
            ("stack_id", str),
            ("temperature", float),
            ("threshold", float),
            ("dilation_radius", int),
            ("feather_radius", int),
            ("seed", int),
            ("on_no_match", str),
        ):
            if key in obj:
                kwargs[key] = conv(obj[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class EditSession:
    """Ordered chain of edit steps over a base image; step k consumes
    step k-1's output."""

    session_id: str
    base_image: ImageBuffer
    steps: tuple[EditStep, ...]
    config: PipelineConfig

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        dims = (self.base_image.width, self.base_image.height)
        for i, step in enumerate(self.steps):
            if (step.output_image.width, step.output_image.height) != dims:
                raise ValueError(f"step {i} output does not match base dimensions")

    @property
    def current_image(self) -> ImageBuffer:
        return self.steps[-1].output_image if self.steps else self.base_image

    def with_step(self, step: EditStep) -> "EditSession":
        return replace(self, steps=self.steps + (step,))


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]


# ---------------------------------------------------------------------------
# Instruction script parser
# ---------------------------------------------------------------------------

_KEYWORDS = ("replace", "with")
_WORD_CHAR = re.compile(r"\w")


@dataclass(frozen=True)
class _Token:
    text: str  # unescaped
    escaped: bool
    line: int
    col: int

    @property
    def keyword(self) -> str | None:
        low = self.text.lower()
        return low if not self.escaped and low in _KEYWORDS else None


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            col += 1
            i += 1
            continue
        if c == ";":
            tokens.append(_Token(";", False, line, col))
            col += 1
            i += 1
            continue
        start_line, start_col = line, col
        escaped = False
        if c == "\\":
            escaped = True
            i += 1
            col += 1
            if i >= n or not _WORD_CHAR.match(text[i]):
                raise ScriptSyntaxError(
                    "backslash must be followed by a word character",
                    start_line,
                    start_col,
                )
        j = i
        while j < n and _WORD_CHAR.match(text[j]):
            j += 1
        if j == i:
            raise ScriptSyntaxError(
                f"unexpected character {text[i]!r}", line, col
            )
        word = text[i:j]
        col += j - i
        i = j
        tokens.append(_Token(word, escaped, start_line, start_col))
    return tokens


def _end_position(text: str) -> tuple[int, int]:
    line = text.count("\n") + 1
    last_nl = text.rfind("\n")
    col = len(text) - last_nl if last_nl >= 0 else len(text) + 1
    return line, col


def parse_instructions(text: str) -> list[EditInstruction]:
    """Parse an instruction script into replacement instructions, in order."""
    if not text.strip():
        end_line, end_col = _end_position(text)
        raise ScriptSyntaxError("empty script", end_line, end_col)
    tokens = _tokenize(text)
    end_line, end_col = _end_position(text)

    def position(idx: int) -> tuple[int, int]:
        if idx < len(tokens):
            return tokens[idx].line, tokens[idx].col
        return end_line, end_col

    instructions: list[EditInstruction] = []
    idx = 0
    while True:
        # clause start
        if idx >= len(tokens):
            line, col = position(idx)
            raise ScriptSyntaxError("empty clause, expected 'replace'", line, col)
        tok = tokens[idx]
        if tok.text == ";":
            raise ScriptSyntaxError(
                "empty clause, expected 'replace'", tok.line, tok.col
            )
        if tok.keyword != "replace":
            raise ScriptSyntaxError(
                f"expected 'replace', got {tok.text!r}", tok.line, tok.col
            )
        idx += 1

        source: list[str] = []
        while idx < len(tokens) and tokens[idx].text != ";" and tokens[idx].keyword != "with":
            source.append(tokens[idx].text)
            idx += 1
        if idx >= len(tokens) or tokens[idx].text == ";":
            line, col = position(idx)
            raise ScriptSyntaxError("expected 'with'", line, col)
        if not source:
            raise ScriptSyntaxError(
                "expected source phrase before 'with'",
                tokens[idx].line,
                tokens[idx].col,
            )
        idx += 1  # consume 'with'

        target: list[str] = []
        while idx < len(tokens) and tokens[idx].text != ";" and tokens[idx].keyword != "with":
            target.append(tokens[idx].text)
            idx += 1
        if idx < len(tokens) and tokens[idx].keyword == "with":
            raise ScriptSyntaxError(
                "unexpected 'with' (escape it as '\\with' inside a phrase)",
                tokens[idx].line,
                tokens[idx].col,
            )
        if not target:
            line, col = position(idx)
            raise ScriptSyntaxError("expected target phrase", line, col)

        instructions.append(
            EditInstruction(" ".join(source), " ".join(target))
        )

        if idx >= len(tokens):
            break
        idx += 1  # consume ';'
        if idx >= len(tokens):
            break  # trailing semicolon
    return instructions


def _render_phrase(phrase: str) -> str:
    out = []
    for token in phrase.split():
        if not all(_WORD_CHAR.match(c) for c in token):
            raise ValueError(f"phrase token {token!r} is not script-safe")
        out.append("\\" + token if token.lower() in _KEYWORDS else token)
    return " ".join(out)


def render_script(instructions: Sequence[EditInstruction]) -> str:
    """Render instructions back to canonical script text (parse round-trips)."""
    clauses = [
        f"replace {_render_phrase(i.source_prompt)} with "
        f"{_render_phrase(i.target_prompt)}"
        for i in instructions
    ]
    return "; ".join(clauses)


# ---------------------------------------------------------------------------
# Edit orchestration
# ---------------------------------------------------------------------------

def _skipped_step(
    image: ImageBuffer, instruction: EditInstruction, selection: Selection, seed: int
) -> EditStep:
    return EditStep(
        instruction=instruction,
        selection=selection,
        dilated_mask=Mask.empty(image.width, image.height),
        output_image=image,
        seed=seed,
        status=StepStatus.SKIPPED_NO_MATCH,
    )


def edit_once(
    image: ImageBuffer,
    instruction: EditInstruction,
    stack: BackendStack,
    config: PipelineConfig,
    override_segment_id: str | None = None,
) -> EditStep:
    """Run one full edit: segment, rank by source prompt, select, dilate,
    inpaint from target prompt, composite.

    With override_segment_id the threshold check is bypassed and the named
    segment is repainted regardless of its rank. Raises StageError /
    NoSegmentsError / NoMatchError; a no-match under the "skip" policy
    returns a pass-through step instead.
    """
    try:
        segments = stack.segmenter.segment(image)
    except SegeditError as exc:
        raise StageError("segment", exc) from exc
    if not segments:
        raise NoSegmentsError(
            f"segmenter {stack.segmenter.info.name!r} returned no segments"
        )

    try:
        ranked = rank_segments(
            image,
            segments,
            instruction.source_prompt,
            stack.scorer,
            spec=config.crop_spec,
            temperature=config.temperature,
        )
        selection = select_target(ranked, config.threshold)
    except SegeditError as exc:
        raise StageError("rank", exc) from exc

    if override_segment_id is not None:
        chosen = next(
            (r for r in ranked if r.segment.segment_id == override_segment_id), None
        )
        if chosen is None:
            raise StageError(
                "rank",
                KeyError(f"no segment with id {override_segment_id!r}"),
            )
        selection = Selection(
            selected=chosen,
            threshold_used=config.threshold,
            all_ranked=selection.all_ranked,
            overridden=True,
        )

    if not selection.matched:
        if config.on_no_match == "skip":
            return _skipped_step(image, instruction, selection, config.seed)
        raise NoMatchError(instruction.source_prompt, config.threshold)

    mask = dilate_mask(selection.selected.segment.mask, config.dilation_radius)
    try:
        generated = stack.inpainter.inpaint(
            image, mask, instruction.target_prompt, config.seed
        )
    except SegeditError as exc:
        raise StageError("inpaint", exc) from exc
    if (generated.width, generated.height) != (image.width, image.height):
        raise StageError(
            "inpaint",
            ValueError(
                f"inpainter returned {generated.width}x{generated.height} for a "
                f"{image.width}x{image.height} input"
            ),
        )
    output = composite(image, generated, mask, config.feather_radius)
    return EditStep(
        instruction=instruction,
        selection=selection,
        dilated_mask=mask,
        output_image=output,
        seed=config.seed,
        status=StepStatus.APPLIED,
    )


def run_session(
    base_image: ImageBuffer,
    instructions: Sequence[EditInstruction],
    stack: BackendStack,
    config: PipelineConfig,
    session_id: str | None = None,
) -> EditSession:
    """Apply instructions sequentially, each step consuming the previous
    output. Per-step seed is config.seed + step index. Stops at the first
    failed step (recorded); skipped steps pass their input through."""
    if not instructions:
        raise ValueError("run_session requires at least one instruction")
    session = EditSession(
        session_id=session_id or new_session_id(),
        base_image=base_image,
        steps=(),
        config=config,
    )
    for index, instruction in enumerate(instructions):
        step_config = replace(config, seed=config.seed + index)
        current = session.current_image
        try:
            step = edit_once(current, instruction, stack, step_config)
        except PipelineError as exc:
            session = session.with_step(
                EditStep(
                    instruction=instruction,
                    selection=None,
                    dilated_mask=Mask.empty(current.width, current.height),
                    output_image=current,
                    seed=step_config.seed,
                    status=StepStatus.FAILED,
                    error=str(exc),
                )
            )
            break
        session = session.with_step(step)
    return session


def undo(session: EditSession, to_step: int) -> EditSession:
    """Truncate the session to its first to_step steps; 0 restores the base."""
    if not (0 <= to_step <= len(session.steps)):
        raise StepIndexError(
            f"to_step {to_step} outside [0, {len(session.steps)}]"
        )
    return replace(session, steps=session.steps[:to_step])
