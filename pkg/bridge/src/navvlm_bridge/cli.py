"""Command line entry point: validate config, build the app, serve it."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .config import BridgeConfig, BridgeConfigError, load_config
from .model import ModelLoadError
from .service import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navvlm-bridge",
        description="Guidance bridge serving /v1/direction and "
                    "/v1/termination over the navvlm wire protocol.")
    parser.add_argument("--config", help="JSON config file; defaults apply "
                                         "field by field when omitted")
    parser.add_argument("--mock", action="store_true",
                        help="force the deterministic mock backend")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else BridgeConfig()
        if args.mock:
            config = config.model_copy(update={"model": "mock"})
        app = create_app(config)
    except (BridgeConfigError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
