"""Command-line entry point: `python -m model_service --config service.json`."""

from __future__ import annotations

import argparse
import sys

from model_service.app import serve
from model_service.config import ConfigError, load_config
from model_service.models import ModelError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="model-service",
        description="Serve embedding, specificity, and question-generation models over HTTP.",
    )
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--port", type=int, default=None, help="override the configured port")
    parser.add_argument("--device", default=None, help="override the configured device")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config, port=args.port, device=args.device)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        serve(config, host=args.host)
    except ModelError as exc:
        print(f"model error ({exc.model_id}): {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
