"""HTTP model server: exposes one in-process backend over the wire protocol.

One server hosts one role. Endpoints:

    GET  /health   -> {"role": ..., "name": ..., capability fields}
    POST /segment  {image: base64 PNG, params}                  (segmenter)
    POST /score    {crops: [base64 PNG], prompt}                (scorer)
    POST /inpaint  {image: base64 PNG, mask, prompt, seed}      (inpainter)

The bundled reference backends make this a drop-in stand-in for a real
model server; any Segmenter/Scorer/Inpainter instance can be served.
"""

from __future__ import annotations

import argparse
import base64
import dataclasses
import json
import logging
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from segedit.backends import (
    Inpainter,
    ReferenceInpainter,
    ReferenceScorer,
    ReferenceSegmenter,
    Scorer,
    Segmenter,
)
from segedit.core import ImageBuffer, Mask, SegeditError

logger = logging.getLogger("segedit.modelserver")


def _role_of(backend) -> str:
    if isinstance(backend, Segmenter):
        return "segmenter"
    if isinstance(backend, Scorer):
        return "scorer"
    if isinstance(backend, Inpainter):
        return "inpainter"
    raise TypeError(f"{type(backend).__name__} implements no backend role")


def _health_payload(backend, role: str) -> dict:
    payload = dataclasses.asdict(backend.info)
    if "languages" in payload:
        payload["languages"] = list(payload["languages"])
    payload["role"] = role
    return payload


def _decode_image(field: str, body: dict) -> ImageBuffer:
    return ImageBuffer.from_png_bytes(base64.b64decode(body[field]))


class _Handler(BaseHTTPRequestHandler):
    backend = None
    role = ""

    def log_message(self, format, *args):
        logger.debug("%s - %s", self.address_string(), format % args)

    def _send(self, status: int, payload: dict):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, _health_payload(self.backend, self.role))
        else:
            self._send(404, {"error": f"no route {self.path}"})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length))
            if not isinstance(body, dict):
                raise ValueError("request body must be a JSON object")
        except (ValueError, json.JSONDecodeError) as exc:
            self._send(400, {"error": f"bad request body: {exc}"})
            return
        route = (self.role, self.path)
        try:
            if route == ("segmenter", "/segment"):
                image = _decode_image("image", body)
                segments = self.backend.segment(image)
                self._send(
                    200, {"segments": [s.to_json() for s in segments]}
                )
            elif route == ("scorer", "/score"):
                crops = [
                    ImageBuffer.from_png_bytes(base64.b64decode(c))
                    for c in body["crops"]
                ]
                scores = self.backend.score(crops, str(body["prompt"]))
                self._send(200, {"scores": scores})
            elif route == ("inpainter", "/inpaint"):
                image = _decode_image("image", body)
                mask = Mask.from_json(body["mask"])
                out = self.backend.inpaint(
                    image, mask, str(body["prompt"]), int(body["seed"])
                )
                self._send(
                    200,
                    {
                        "image": base64.b64encode(out.to_png_bytes()).decode(
                            "ascii"
                        )
                    },
                )
            else:
                self._send(
                    404, {"error": f"no route {self.path} for role {self.role}"}
                )
        except (SegeditError, KeyError, TypeError, ValueError) as exc:
            self._send(400, {"error": f"{type(exc).__name__}: {exc}"})


def serve_backend(backend, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Start serving a backend on a daemon thread; returns the server
    (its .server_address carries the bound port). Call .shutdown() to stop."""
    role = _role_of(backend)
    handler = type(
        f"_{role.capitalize()}Handler", (_Handler,), {"backend": backend, "role": role}
    )
    server = ThreadingHTTPServer((host, port), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    logger.info("serving %s on %s:%d", role, *server.server_address)
    return server


_REFERENCE_FACTORIES = {
    "segmenter": ReferenceSegmenter,
    "scorer": ReferenceScorer,
    "inpainter": ReferenceInpainter,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="segedit-modelserver",
        description="Serve a reference backend over the model wire protocol.",
    )
    parser.add_argument(
        "--role", required=True, choices=sorted(_REFERENCE_FACTORIES)
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    backend = _REFERENCE_FACTORIES[args.role]()
    server = serve_backend(backend, args.host, args.port)
    print(f"{args.role} listening on {server.server_address[0]}:{server.server_address[1]}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
