"""Guidance oracles: reply parsing, scripted and geodesic oracles, and the
HTTP client for a remote vision-language bridge.

The client-side parse of the raw reply text is authoritative everywhere;
remote transport failures degrade to NoInfo / Continue, never to a
directional answer or a stop.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass
from enum import Enum

import requests

from . import scene as scenemod
from .scene import Action, AgentPose, EpisodeSpec, SceneMap

DEFAULT_WIRE_TIMEOUT_S = 10.0
TIMEOUT_ENV_VAR = "NAVVLM_REMOTE_TIMEOUT_MS"


class Guidance(Enum):
    LEFT = "left"
    RIGHT = "right"
    FORWARD = "forward"
    EXPLORE = "explore"
    NOINFO = "noinfo"

    @property
    def is_directional(self) -> bool:
        return self in (Guidance.LEFT, Guidance.RIGHT, Guidance.FORWARD)


class PromptKind(Enum):
    TERMINATION_CHECK = "termination"
    DIRECTION_QUERY = "direction"


class TerminateVerdict(Enum):
    STOP = "stop"
    CONTINUE = "continue"


@dataclass(frozen=True)
class SceneSnapshot:
    """Structured stand-in for an image: depth ranges, field of view, and
    the goal labels currently visible from the pose."""
    ranges: tuple[float, ...]
    fov_deg: float
    visible_labels: tuple[str, ...]


@dataclass(frozen=True)
class OracleRequest:
    prompt_kind: PromptKind
    goal: str
    step: int
    image_b64: str | None = None
    snapshot: SceneSnapshot | None = None

    def __post_init__(self):
        if (self.image_b64 is None) == (self.snapshot is None):
            raise ValueError("exactly one of image_b64 / snapshot must be provided")


@dataclass(frozen=True)
class OracleReply:
    raw_text: str
    latency_ms: float = 0.0

    @property
    def guidance(self) -> Guidance:
        return parse_oracle_reply(self.raw_text)

    @property
    def verdict(self) -> TerminateVerdict:
        return parse_termination_reply(self.raw_text)


class OracleTransportError(RuntimeError):
    """Remote oracle unreachable, slow, or answering out of protocol."""


# ---------------------------------------------------------------------------
# reply parsing
# ---------------------------------------------------------------------------

# (keywords, guidance) scanned in priority order; first match wins
_DIRECTION_KEYWORDS = (
    (("left",), Guidance.LEFT),
    (("right",), Guidance.RIGHT),
    (("straight", "forward"), Guidance.FORWARD),
    (("explore",), Guidance.EXPLORE),
)

_STOP_TOKENS = ("yes", "stop", "reached")


def parse_oracle_reply(text: str) -> Guidance:
    """Map free-form reply text to a Guidance value.

    Case-insensitive substring scan in fixed priority order (left, right,
    straight/forward, explore); anything else is NoInfo.  Total: never
    raises on any string.
    """
    low = text.lower()
    for keywords, guidance in _DIRECTION_KEYWORDS:
        if any(k in low for k in keywords):
            return guidance
    return Guidance.NOINFO


def parse_termination_reply(text: str) -> TerminateVerdict:
    """Affirmative tokens (yes / stop / reached) mean Stop; everything
    else, including garbage, means Continue."""
    low = text.lower()
    if any(tok in low for tok in _STOP_TOKENS):
        return TerminateVerdict.STOP
    return TerminateVerdict.CONTINUE


def query_direction(oracle, request: OracleRequest) -> Guidance:
    """Ask for a direction; transport failures degrade to NoInfo."""
    try:
        reply = oracle.direction(request)
    except OracleTransportError:
        return Guidance.NOINFO
    return parse_oracle_reply(reply.raw_text)


def query_termination(oracle, request: OracleRequest) -> TerminateVerdict:
    """Ask whether to stop; transport failures degrade to Continue."""
    try:
        reply = oracle.termination(request)
    except OracleTransportError:
        return TerminateVerdict.CONTINUE
    return parse_termination_reply(reply.raw_text)


# ---------------------------------------------------------------------------
# scripted oracles
# ---------------------------------------------------------------------------

class Oracle:
    """Shared oracle surface: ``observe`` feeds the controller's pose to
    oracles that hold ground truth (scripted ones); the remote oracle
    ignores it and sees only the request payload."""

    def observe(self, pose: AgentPose) -> None:
        pass

    def direction(self, request: OracleRequest) -> OracleReply:
        raise NotImplementedError

    def termination(self, request: OracleRequest) -> OracleReply:
        raise NotImplementedError


class RandomOracle(Oracle):
    """Uniformly random directional/explore advice, never stops.

    The reply sequence is fully determined by the seed.
    """

    _CHOICES = ("left", "right", "forward", "explore")

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def direction(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text=self._rng.choice(self._CHOICES))

    def termination(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text="no")


class AlwaysExploreOracle(Oracle):
    """Explore on every direction query; never stops."""

    def direction(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text="explore")

    def termination(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text="no")


class StopAtOracle(Oracle):
    """Continue before step k, stop from step k on; direction is always
    explore."""

    def __init__(self, k: int):
        self.k = k

    def direction(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text="explore")

    def termination(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text="yes" if request.step >= self.k else "no")


# ---------------------------------------------------------------------------
# geodesic (perfect) oracle
# ---------------------------------------------------------------------------

class GeodesicOracle(Oracle):
    """Ground-truth oracle: advises the turn-then-forward candidate that
    strictly shrinks the geodesic distance to the goal region the most.

    Answers stop when the pose is within the success radius of a goal
    cell with an unobstructed line of sight to it.  Holds the whole scene,
    unlike the remote oracle which only ever sees the observation payload.
    """

    def __init__(self, scene: SceneMap, spec: EpisodeSpec,
                 success_radius_m: float = 1.0):
        if spec.goal_label not in scene.goal_regions or not scene.goal_regions[spec.goal_label]:
            raise ValueError(f"scene {scene.scene_id!r} has no goal region {spec.goal_label!r}")
        self.scene = scene
        self.goal_cells = scene.goal_regions[spec.goal_label]
        self.success_radius_m = success_radius_m
        self._field = scenemod.geodesic_field(scene, self.goal_cells)
        self._pose: AgentPose | None = None

    def observe(self, pose: AgentPose) -> None:
        """The controller feeds the true pose before each query."""
        self._pose = pose

    def _distance_at(self, pose: AgentPose) -> float:
        ix, iy = pose.cell(self.scene.resolution)
        if not self.scene.in_bounds(ix, iy):
            return math.inf
        return float(self._field[iy, ix])

    def _candidates(self, pose: AgentPose):
        """(keyword, pose after turn(s) + one forward, blocked) triples;
        forward first so ties prefer not turning."""
        out = []
        for keyword, turns in (("straight", ()),
                               ("left", (Action.TURN_LEFT,)),
                               ("right", (Action.TURN_RIGHT,))):
            p = pose
            for turn in turns:
                p, _ = scenemod.step(self.scene, p, turn)
            p2, collided = scenemod.step(self.scene, p, Action.FORWARD)
            out.append((keyword, p2, collided))
        return out

    def direction(self, request: OracleRequest) -> OracleReply:
        if self._pose is None:
            raise RuntimeError("GeodesicOracle.observe() must be called before queries")
        here = self._distance_at(self._pose)
        best_kw = None
        best_d = here
        for keyword, pose_after, blocked in self._candidates(self._pose):
            if blocked:
                continue
            d = self._distance_at(pose_after)
            if d < best_d:
                best_d = d
                best_kw = keyword
        if best_kw is None:
            return OracleReply(raw_text="explore")
        return OracleReply(raw_text=best_kw)

    def termination(self, request: OracleRequest) -> OracleReply:
        if self._pose is None:
            raise RuntimeError("GeodesicOracle.observe() must be called before queries")
        pose = self._pose
        for cell in sorted(self.goal_cells):
            cx, cy = self.scene.cell_center(cell)
            if math.hypot(cx - pose.x, cy - pose.y) > self.success_radius_m:
                continue
            if scenemod.line_of_sight(self.scene, pose.x, pose.y, cx, cy):
                return OracleReply(raw_text="yes")
        return OracleReply(raw_text="no")


# ---------------------------------------------------------------------------
# remote oracle (wire protocol client)
# ---------------------------------------------------------------------------

def wire_timeout_s() -> float:
    """Wire timeout: 10 s unless NAVVLM_REMOTE_TIMEOUT_MS overrides it."""
    raw = os.environ.get(TIMEOUT_ENV_VAR)
    if raw is None or not raw.strip():
        return DEFAULT_WIRE_TIMEOUT_S
    try:
        return float(raw) / 1000.0
    except ValueError:
        return DEFAULT_WIRE_TIMEOUT_S


def request_body(request: OracleRequest) -> dict:
    """JSON body for POST /v1/direction and /v1/termination."""
    snapshot = None
    if request.snapshot is not None:
        snapshot = {
            "ranges": [float(r) for r in request.snapshot.ranges],
            "fov": float(request.snapshot.fov_deg),
            "visible_labels": list(request.snapshot.visible_labels),
        }
    return {
        "goal": request.goal,
        "prompt": request.prompt_kind.value,
        "image_b64": request.image_b64,
        "snapshot": snapshot,
        "step": request.step,
    }


class RemoteOracle(Oracle):
    """Client for a guidance bridge speaking the /v1 wire protocol.

    The bridge's own parse of its reply is advisory; this side re-parses
    ``raw_text``.  Timeouts, connection errors, non-200 statuses, and
    malformed response bodies all surface as OracleTransportError, which
    the query helpers fold to NoInfo / Continue.
    """

    def __init__(self, base_url: str, timeout_s: float | None = None,
                 session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = wire_timeout_s() if timeout_s is None else timeout_s
        self._session = session or requests.Session()

    def _post(self, endpoint: str, request: OracleRequest) -> OracleReply:
        url = f"{self.base_url}{endpoint}"
        try:
            resp = self._session.post(url, json=request_body(request),
                                      timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise OracleTransportError(f"POST {url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise OracleTransportError(f"POST {url} returned {resp.status_code}")
        try:
            body = resp.json()
            raw_text = body["raw_text"]
            latency = float(body.get("latency_ms", 0.0))
        except (ValueError, KeyError, TypeError) as exc:
            raise OracleTransportError(f"POST {url} returned a malformed body") from exc
        if not isinstance(raw_text, str):
            raise OracleTransportError(f"POST {url} returned a non-string raw_text")
        return OracleReply(raw_text=raw_text, latency_ms=latency)

    def direction(self, request: OracleRequest) -> OracleReply:
        return self._post("/v1/direction", request)

    def termination(self, request: OracleRequest) -> OracleReply:
        return self._post("/v1/termination", request)
