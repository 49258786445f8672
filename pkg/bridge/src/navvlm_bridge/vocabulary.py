"""Advisory reply classification.

The service annotates each answer with its own reading of the text so
callers can log or debug without re-parsing, but the annotation is
advisory: the client re-parses ``raw_text`` and its result is
authoritative, keeping exactly one parser in charge of behavior.
"""

GUIDANCE_VALUES = ("left", "right", "forward", "explore", "noinfo")
VERDICT_VALUES = ("stop", "continue")

# (keywords, value) scanned in priority order; first match wins
_DIRECTION_KEYWORDS = (
    (("left",), "left"),
    (("right",), "right"),
    (("straight", "forward"), "forward"),
    (("explore",), "explore"),
)

_STOP_TOKENS = ("yes", "stop", "reached")


def advisory_guidance(text: str) -> str:
    """Best-effort direction reading of free reply text; never raises."""
    low = text.lower()
    for keywords, value in _DIRECTION_KEYWORDS:
        if any(k in low for k in keywords):
            return value
    return "noinfo"


def advisory_verdict(text: str) -> str:
    """Best-effort stop/continue reading of free reply text; never raises."""
    low = text.lower()
    if any(tok in low for tok in _STOP_TOKENS):
        return "stop"
    return "continue"
