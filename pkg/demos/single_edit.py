"""
One text-guided edit, end to end
================================

Parses an edit instruction, then runs the full pipeline once: segment
the scene, rank segments against the source phrase, dilate the winning
mask, inpaint from the target phrase, and composite the patch back.
"""

from pathlib import Path

import numpy as np

from segedit import (
    ImageBuffer,
    PipelineConfig,
    edit_once,
    parse_instructions,
    reference_stack,
    rle_decode,
)

OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

# The instruction mini-language: "replace <source phrase> with <target
# phrase>", clauses separated by ";".
[instruction] = parse_instructions("replace red circle with blue circle")
print(f"instruction: {instruction.source_prompt!r} -> {instruction.target_prompt!r}")

# The scene: a red disk on white.
px = np.full((64, 64, 3), 255, dtype=np.uint8)
yy, xx = np.mgrid[0:64, 0:64]
px[(yy - 32) ** 2 + (xx - 32) ** 2 <= 14 ** 2] = (255, 0, 0)
scene = ImageBuffer(px)

# One call does the whole cycle. The config controls crop presentation,
# softmax temperature, the no-match threshold, mask dilation, edge
# feathering, and the inpainting seed.
config = PipelineConfig(dilation_radius=2, feather_radius=1, seed=7)
step = edit_once(scene, instruction, reference_stack(), config)

print(f"status: {step.status.value}")
print(f"selected segment: {step.selection.selected.segment.segment_id}")
ranked = step.selection.all_ranked
print("ranking (normalized scores):")
for entry in ranked:
    print(f"  #{entry.rank} {entry.segment.segment_id}: {entry.norm_score:.3f}")

# The recorded mask is the selection after dilation; the output image has
# that region repainted and everything else untouched.
grown = rle_decode(step.dilated_mask)
changed = np.any(step.output_image.pixels != scene.pixels, axis=2)
assert not np.any(changed & ~grown)
print(f"dilated mask area: {step.dilated_mask.area}, pixels changed: {changed.sum()}")

(OUT / "single_edit_before.png").write_bytes(scene.to_png_bytes())
(OUT / "single_edit_after.png").write_bytes(step.output_image.to_png_bytes())
print(f"wrote {OUT / 'single_edit_before.png'} and {OUT / 'single_edit_after.png'}")
