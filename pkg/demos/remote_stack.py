"""
Remote backends over the wire protocol
======================================

Serves each reference backend as a small HTTP model server on loopback,
points remote adapters at them, and shows that an edit routed over the
wire is pixel-identical to the same edit run in process.
"""

import numpy as np

from segedit import (
    BackendStack,
    ImageBuffer,
    PipelineConfig,
    edit_once,
    parse_instructions,
    reference_stack,
    remote_adapter,
)
from segedit.modelserver import serve_backend

# The scene and instruction from the single-edit walkthrough.
px = np.full((64, 64, 3), 255, dtype=np.uint8)
yy, xx = np.mgrid[0:64, 0:64]
px[(yy - 32) ** 2 + (xx - 32) ** 2 <= 14 ** 2] = (255, 0, 0)
scene = ImageBuffer(px)
[instruction] = parse_instructions("replace red circle with blue circle")
config = PipelineConfig(dilation_radius=2, feather_radius=1, seed=7)

local = reference_stack()

# Start one model server per role. Port 0 binds an ephemeral port; each
# server runs on a daemon thread. In production these would be separate
# processes or hosts, launched with `python3 -m segedit.modelserver`.
servers = {
    "segmenter": serve_backend(local.segmenter),
    "scorer": serve_backend(local.scorer),
    "inpainter": serve_backend(local.inpainter),
}
try:
    endpoints = {
        role: f"http://127.0.0.1:{srv.server_address[1]}"
        for role, srv in servers.items()
    }
    for role, url in endpoints.items():
        print(f"{role} served at {url}")

    # A remote adapter speaks the JSON wire protocol (/health, /segment,
    # /score, /inpaint) and presents the same interface as an in-process
    # backend, so it drops straight into a stack.
    remote = BackendStack(
        stack_id="loopback",
        segmenter=remote_adapter(endpoints["segmenter"], "segmenter"),
        scorer=remote_adapter(endpoints["scorer"], "scorer"),
        inpainter=remote_adapter(endpoints["inpainter"], "inpainter"),
    )
    print(f"remote segmenter reports: {remote.segmenter.info.name}")

    step_local = edit_once(scene, instruction, local, config)
    step_remote = edit_once(scene, instruction, remote, config)

    same = np.array_equal(
        step_local.output_image.pixels, step_remote.output_image.pixels
    )
    print(f"remote output identical to in-process output: {same}")
    assert same
finally:
    for srv in servers.values():
        srv.shutdown()
print("servers stopped")
