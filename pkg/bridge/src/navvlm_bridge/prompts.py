"""Prompt construction for the two query kinds the service answers."""

from __future__ import annotations

from .config import BridgeConfig

DIRECTION = "direction"
TERMINATION = "termination"
PROMPT_KINDS = (DIRECTION, TERMINATION)


def build_prompt(kind: str, goal: str,
                 config: BridgeConfig | None = None) -> str:
    """Render the prompt sent to the model for one query.

    ``kind`` is one of ``direction`` / ``termination`` (the wire values);
    ``goal`` is the caller's free-text navigation target and must be
    nonempty.
    """
    if kind not in PROMPT_KINDS:
        raise ValueError(f"unknown prompt kind {kind!r} "
                         f"(expected one of {PROMPT_KINDS})")
    if not goal or not goal.strip():
        raise ValueError("goal must be nonempty")
    config = config or BridgeConfig()
    template = (config.direction_template if kind == DIRECTION
                else config.termination_template)
    return template.format(goal=goal)
