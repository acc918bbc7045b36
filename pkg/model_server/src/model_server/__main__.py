"""Run the service: python -m model_server --registry registry.json"""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .registry import Registry


def main() -> None:
    parser = argparse.ArgumentParser(description="Serve the reaction classifiers over HTTP.")
    parser.add_argument("--registry", required=True, help="Registry JSON file.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    args = parser.parse_args()

    registry = Registry.from_file(args.registry)
    uvicorn.run(create_app(registry), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
