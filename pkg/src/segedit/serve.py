"""Run the edit-session HTTP service under uvicorn."""

from __future__ import annotations

import argparse
import os
import sys

import uvicorn

from segedit.backends import default_registry, load_registry
from segedit.service import create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="segedit-serve", description="Serve the region-editing session API."
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    parser.add_argument(
        "--store",
        default=os.environ.get("SEGEDIT_STORE", "segedit_store"),
        help="session store directory (default: $SEGEDIT_STORE or ./segedit_store)",
    )
    parser.add_argument(
        "--registry",
        default=os.environ.get("SEGEDIT_REGISTRY"),
        help="backend registry JSON path (default: $SEGEDIT_REGISTRY or "
        "the built-in reference stack)",
    )
    parser.add_argument(
        "--frontend", help="directory of static UI files to serve at /"
    )
    args = parser.parse_args(argv)

    registry = load_registry(args.registry) if args.registry else default_registry()
    app = create_app(args.store, registry, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
