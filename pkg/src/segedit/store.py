"""Directory-backed persistence for edit sessions.

Layout, one directory per session under the store root:

    <root>/<session_id>/session.json   metadata, schema 1
    <root>/<session_id>/base.png       the uploaded image
    <root>/<session_id>/step_000.png   output of step 0, and so on

session.json is written with sorted keys and a fixed indent, and every
file lands via an adjacent temp file plus rename, so a save -> load ->
save cycle is byte-identical and a crash cannot leave a half-written
session behind.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path

from segedit.core import ImageBuffer, Mask, SegeditError
from segedit.pipeline import (
    EditInstruction,
    EditSession,
    EditStep,
    PipelineConfig,
    StepStatus,
)
from segedit.ranking import Selection

SCHEMA_VERSION = 1

_SESSION_ID = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class StoreError(SegeditError):
    """Base class for persistence failures."""


class SessionNotFoundError(StoreError, KeyError):
    def __init__(self, session_id: str):
        super().__init__(f"no stored session {session_id!r}")
        self.session_id = session_id


class CorruptSessionError(StoreError):
    """Stored session data fails validation."""


def _write_bytes(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _step_to_json(step: EditStep) -> dict:
    return {
        "instruction": {
            "source_prompt": step.instruction.source_prompt,
            "target_prompt": step.instruction.target_prompt,
        },
        "selection": step.selection.to_json() if step.selection else None,
        "dilated_mask": step.dilated_mask.to_json(),
        "seed": step.seed,
        "status": step.status.value,
        "error": step.error,
    }


def _step_from_json(obj: dict, output_image: ImageBuffer) -> EditStep:
    instr = obj["instruction"]
    selection = (
        Selection.from_json(obj["selection"]) if obj.get("selection") else None
    )
    return EditStep(
        instruction=EditInstruction(
            str(instr["source_prompt"]), str(instr["target_prompt"])
        ),
        selection=selection,
        dilated_mask=Mask.from_json(obj["dilated_mask"]),
        output_image=output_image,
        seed=int(obj["seed"]),
        status=StepStatus(obj["status"]),
        error=obj.get("error"),
    )


class SessionStore:
    """Saves and loads EditSession objects under one root directory."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id: str) -> Path:
        if not _SESSION_ID.match(session_id):
            raise StoreError(f"invalid session id {session_id!r}")
        return self.root / session_id

    def list_sessions(self) -> list[str]:
        return sorted(
            p.name
            for p in self.root.iterdir()
            if p.is_dir() and (p / "session.json").exists()
        )

    def exists(self, session_id: str) -> bool:
        return (self._session_dir(session_id) / "session.json").exists()

    def save(self, session: EditSession):
        sdir = self._session_dir(session.session_id)
        sdir.mkdir(parents=True, exist_ok=True)
        _write_bytes(sdir / "base.png", session.base_image.to_png_bytes())
        for i, step in enumerate(session.steps):
            _write_bytes(
                sdir / f"step_{i:03d}.png", step.output_image.to_png_bytes()
            )
        # drop step images beyond the current chain (left by undo)
        for path in sdir.glob("step_*.png"):
            m = re.fullmatch(r"step_(\d{3})\.png", path.name)
            if m and int(m.group(1)) >= len(session.steps):
                path.unlink()
        doc = {
            "schema": SCHEMA_VERSION,
            "session_id": session.session_id,
            "config": session.config.to_json(),
            "steps": [_step_to_json(s) for s in session.steps],
        }
        payload = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False)
        _write_bytes(sdir / "session.json", payload.encode("utf-8") + b"\n")

    def load(self, session_id: str) -> EditSession:
        sdir = self._session_dir(session_id)
        meta_path = sdir / "session.json"
        if not meta_path.exists():
            raise SessionNotFoundError(session_id)
        try:
            doc = json.loads(meta_path.read_text("utf-8"))
        except ValueError as exc:
            raise CorruptSessionError(f"unreadable session.json: {exc}") from exc
        try:
            if doc.get("schema") != SCHEMA_VERSION:
                raise CorruptSessionError(
                    f"unsupported schema {doc.get('schema')!r}"
                )
            if doc.get("session_id") != session_id:
                raise CorruptSessionError(
                    f"session.json names {doc.get('session_id')!r}, "
                    f"directory is {session_id!r}"
                )
            config = PipelineConfig.from_json(doc["config"])
            base = ImageBuffer.from_png_bytes((sdir / "base.png").read_bytes())
            steps = []
            for i, record in enumerate(doc["steps"]):
                png = (sdir / f"step_{i:03d}.png").read_bytes()
                steps.append(_step_from_json(record, ImageBuffer.from_png_bytes(png)))
        except CorruptSessionError:
            raise
        except (KeyError, TypeError, ValueError, OSError) as exc:
            raise CorruptSessionError(f"invalid session data: {exc}") from exc
        return EditSession(
            session_id=session_id,
            base_image=base,
            steps=tuple(steps),
            config=config,
        )

    def delete(self, session_id: str):
        sdir = self._session_dir(session_id)
        if not sdir.exists():
            raise SessionNotFoundError(session_id)
        for path in sorted(sdir.iterdir()):
            path.unlink()
        sdir.rmdir()
