"""HTTP guidance bridge for navvlm.

Serves the two wire-protocol queries (direction, termination), rendering
each into a prompt for a pluggable model backend; ships with a
deterministic mock backend so the protocol is testable without model
assets.
"""

from .config import (
    DEFAULT_DIRECTION_TEMPLATE,
    DEFAULT_TERMINATION_TEMPLATE,
    BridgeConfig,
    BridgeConfigError,
    load_config,
)
from .model import MODEL_LOADERS, MockModel, ModelError, ModelLoadError, resolve_model
from .prompts import DIRECTION, TERMINATION, build_prompt
from .service import create_app
from .vocabulary import advisory_guidance, advisory_verdict

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeConfigError",
    "DEFAULT_DIRECTION_TEMPLATE",
    "DEFAULT_TERMINATION_TEMPLATE",
    "DIRECTION",
    "MODEL_LOADERS",
    "MockModel",
    "ModelError",
    "ModelLoadError",
    "TERMINATION",
    "advisory_guidance",
    "advisory_verdict",
    "build_prompt",
    "create_app",
    "load_config",
    "resolve_model",
    "__version__",
]
