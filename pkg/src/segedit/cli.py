"""Batch command line: run an instruction script against one image.

    segedit --image in.png --script "replace red circle with blue" \
            --stack reference --out out.png

Exit codes: 0 every step applied, 2 at least one step skipped (no match
under the skip policy), 1 on syntax errors, pipeline failures, or bad
arguments. Set SEGEDIT_STORE to also persist the session to a store
directory; SEGEDIT_REGISTRY points at a backend registry JSON file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from segedit.backends import default_registry, load_registry
from segedit.core import ImageBuffer, SegeditError
from segedit.pipeline import (
    PipelineConfig,
    ScriptSyntaxError,
    StepStatus,
    parse_instructions,
    run_session,
)
from segedit.store import SessionStore

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_SKIPPED = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segedit",
        description="Replace image regions described by text with new "
        "content generated from text.",
    )
    parser.add_argument("--image", required=True, help="input PNG path")
    script = parser.add_mutually_exclusive_group(required=True)
    script.add_argument("--script", help="instruction script text")
    script.add_argument("--script-file", help="file containing the script")
    parser.add_argument(
        "--stack", default=None, help="backend stack id (default: reference)"
    )
    parser.add_argument("--config", help="pipeline config JSON path")
    parser.add_argument("--out", required=True, help="final output PNG path")
    parser.add_argument(
        "--steps-dir",
        help="directory for per-step PNGs and the session report "
        "(default: <out>_steps next to --out)",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="base seed (overrides config)"
    )
    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        obj = json.loads(Path(args.config).read_text("utf-8"))
        if not isinstance(obj, dict):
            raise ValueError("config must be a JSON object")
        config = PipelineConfig.from_json(obj)
    else:
        config = PipelineConfig()
    if args.stack is not None:
        config = dataclasses.replace(config, stack_id=args.stack)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _load_registry_from_env():
    path = os.environ.get("SEGEDIT_REGISTRY")
    return load_registry(path) if path else default_registry()


def _session_report(session) -> dict:
    return {
        "schema": 1,
        "session_id": session.session_id,
        "config": session.config.to_json(),
        "steps": [
            {
                "index": i + 1,
                "status": step.status.value,
                "source_prompt": step.instruction.source_prompt,
                "target_prompt": step.instruction.target_prompt,
                "seed": step.seed,
                "selected_segment_id": (
                    step.selection.selected.segment.segment_id
                    if step.selection is not None and step.selection.matched
                    else None
                ),
                "error": step.error,
                "image": f"step_{i:03d}.png",
            }
            for i, step in enumerate(session.steps)
        ],
    }


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        script_text = (
            args.script
            if args.script is not None
            else Path(args.script_file).read_text("utf-8")
        )
        instructions = parse_instructions(script_text)
    except ScriptSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    try:
        config = _load_config(args)
        registry = _load_registry_from_env()
        stack = registry.get(config.stack_id)
        if stack is None:
            raise ValueError(
                f"unknown stack {config.stack_id!r}; "
                f"available: {sorted(registry)}"
            )
        image = ImageBuffer.from_png_bytes(Path(args.image).read_bytes())
    except (SegeditError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    session = run_session(image, instructions, stack, config)

    out_path = Path(args.out)
    steps_dir = (
        Path(args.steps_dir)
        if args.steps_dir
        else out_path.parent / (out_path.stem + "_steps")
    )
    try:
        steps_dir.mkdir(parents=True, exist_ok=True)
        for i, step in enumerate(session.steps):
            (steps_dir / f"step_{i:03d}.png").write_bytes(
                step.output_image.to_png_bytes()
            )
        report = json.dumps(
            _session_report(session), sort_keys=True, indent=2, ensure_ascii=False
        )
        (steps_dir / "session.json").write_text(report + "\n", "utf-8")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_bytes(session.current_image.to_png_bytes())
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    store_dir = os.environ.get("SEGEDIT_STORE")
    if store_dir:
        SessionStore(store_dir).save(session)

    exit_code = EXIT_OK
    for i, step in enumerate(session.steps):
        if step.status is StepStatus.FAILED:
            print(f"step {i + 1} failed: {step.error}", file=sys.stderr)
            exit_code = EXIT_FAILURE
        elif step.status is StepStatus.SKIPPED_NO_MATCH:
            print(
                f"step {i + 1} skipped: no segment matched "
                f"{step.instruction.source_prompt!r}",
                file=sys.stderr,
            )
            if exit_code == EXIT_OK:
                exit_code = EXIT_SKIPPED
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
