"""Answer backends.

A backend takes the rendered prompt plus the raw request payload and
returns ``(raw_text, latency_ms)``.  The shipped backend is ``mock``: a
deterministic rule needing no model assets, so protocol conformance is
testable anywhere.  Real model clients plug in through
``create_app(model=...)`` or a loader registered in ``MODEL_LOADERS``.
"""

from __future__ import annotations

from typing import Callable, Protocol


class ModelLoadError(RuntimeError):
    """The configured model cannot be brought up; the service must refuse
    to start and say why."""


class ModelError(RuntimeError):
    """A single request failed inside the model; surfaces as HTTP 503."""


class ModelClient(Protocol):
    def answer(self, kind: str, prompt: str, goal: str,
               image_b64: str | None,
               snapshot: dict | None) -> tuple[str, float]: ...


class MockModel:
    """Deterministic stand-in for a vision-language model.

    Rule: when the goal text and a visible label contain each other in
    either direction (case-insensitive), the goal counts as in view ->
    advise going straight / stopping; otherwise advise exploring /
    continuing.  Image-only payloads carry no labels, so they never match.
    Latency is reported as 0.0 so identical requests produce identical
    response bodies.
    """

    def answer(self, kind: str, prompt: str, goal: str,
               image_b64: str | None,
               snapshot: dict | None) -> tuple[str, float]:
        labels = snapshot["visible_labels"] if snapshot else []
        goal_low = goal.lower()
        seen = any(label.lower() in goal_low or goal_low in label.lower()
                   for label in labels if label.strip())
        if kind == "direction":
            text = ("go straight ahead toward the goal" if seen
                    else "explore more of the area")
        else:
            text = "yes, stop here" if seen else "no, continue searching"
        return text, 0.0


MODEL_LOADERS: dict[str, Callable[[], ModelClient]] = {
    "mock": MockModel,
}


def resolve_model(identifier: str) -> ModelClient:
    """Instantiate the backend named by the config's model identifier."""
    loader = MODEL_LOADERS.get(identifier)
    if loader is None:
        raise ModelLoadError(
            f"model {identifier!r} is not available: this build ships only "
            f"the deterministic 'mock' backend (available: "
            f"{sorted(MODEL_LOADERS)}); pass a client object to "
            f"create_app(model=...) or register a loader in MODEL_LOADERS "
            f"to serve a real model")
    try:
        return loader()
    except Exception as exc:
        raise ModelLoadError(f"model {identifier!r} failed to load: {exc}") from exc
