"""Service configuration.

A config is a small JSON object; every field has a sensible default, so
``BridgeConfig()`` with no file at all runs the mock backend on localhost.
Prompt templates are overridable but must keep the ``{goal}`` placeholder
the service substitutes per request.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

DEFAULT_DIRECTION_TEMPLATE = (
    "To get to {goal}, which direction should I go? "
    "Answer with one of: left, right, go straight, explore more."
)
DEFAULT_TERMINATION_TEMPLATE = (
    "Is {goal} close enough in the current view that I should stop? "
    "Answer yes or no."
)


class BridgeConfigError(ValueError):
    """A config file that cannot be loaded or fails validation."""


class BridgeConfig(BaseModel):
    """Validated service settings (see module docstring for defaults)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: str = "mock"
    host: str = "127.0.0.1"
    port: int = Field(default=8080, ge=0, le=65535)
    direction_template: str = DEFAULT_DIRECTION_TEMPLATE
    termination_template: str = DEFAULT_TERMINATION_TEMPLATE
    max_reply_tokens: int = Field(default=64, ge=1)

    @field_validator("direction_template", "termination_template")
    @classmethod
    def _needs_goal_placeholder(cls, template: str) -> str:
        if "{goal}" not in template:
            raise ValueError("prompt template must contain the '{goal}' "
                             "placeholder")
        return template

    @field_validator("model")
    @classmethod
    def _needs_model_name(cls, model: str) -> str:
        if not model.strip():
            raise ValueError("model identifier must be nonempty")
        return model


def load_config(path: str | Path) -> BridgeConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise BridgeConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise BridgeConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise BridgeConfigError(f"config file {path} must hold a JSON object")
    try:
        return BridgeConfig(**payload)
    except ValidationError as exc:
        raise BridgeConfigError(f"config file {path} is invalid: {exc}")
