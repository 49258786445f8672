"""Ground-truth scenes: text format, depth sensing, motion, geodesics.

World frame: x grows with grid column, y with grid row, both in meters.
Cell (ix, iy) covers ``[ix*h, (ix+1)*h) x [iy*h, (iy+1)*h)`` for cell size
``h``; arrays are indexed ``[iy, ix]``.  Headings are degrees, 0 along +x,
counter-clockwise positive, so a left turn increases the heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import kernels

FORWARD_STEP_M = 0.25
TURN_DEG = 30.0

DEFAULT_N_RAYS = 120
DEFAULT_FOV_DEG = 90.0
DEFAULT_MAX_RANGE_M = 5.0

OBSTACLE_GLYPH = "#"
FREE_GLYPH = "."


class SceneParseError(ValueError):
    """Scene text rejected; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class Action(Enum):
    FORWARD = "forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    STOP = "stop"


@dataclass(frozen=True)
class AgentPose:
    x: float
    y: float
    heading_deg: float

    def cell(self, resolution: float) -> tuple[int, int]:
        return (int(math.floor(self.x / resolution)),
                int(math.floor(self.y / resolution)))


@dataclass
class SceneMap:
    """Static ground truth: obstacle grid plus labeled goal regions."""

    scene_id: str
    resolution: float
    obstacles: np.ndarray          # (H, W) bool
    goal_regions: dict[str, frozenset[tuple[int, int]]]

    @property
    def height(self) -> int:
        return self.obstacles.shape[0]

    @property
    def width(self) -> int:
        return self.obstacles.shape[1]

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_free_cell(self, ix: int, iy: int) -> bool:
        return self.in_bounds(ix, iy) and not self.obstacles[iy, ix]

    def is_free_point(self, x: float, y: float) -> bool:
        return self.is_free_cell(int(math.floor(x / self.resolution)),
                                 int(math.floor(y / self.resolution)))

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.resolution,
                (cell[1] + 0.5) * self.resolution)

    def obstacles_u8(self) -> np.ndarray:
        u8 = getattr(self, "_u8_cache", None)
        if u8 is None:
            u8 = self.obstacles.astype(np.uint8)
            self._u8_cache = u8
        return u8

    def validate(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.obstacles.ndim != 2 or 0 in self.obstacles.shape:
            raise ValueError("obstacle grid must be a non-empty 2-D array")
        for label, cells in self.goal_regions.items():
            for ix, iy in cells:
                if not self.is_free_cell(ix, iy):
                    raise ValueError(f"goal region {label!r} has non-free cell ({ix}, {iy})")


@dataclass(frozen=True)
class DepthScan:
    """One sweep of range readings; ray 0 is the leftmost ray."""

    ranges: np.ndarray             # (n_rays,) meters, in (0, max_range]
    hits: np.ndarray               # (n_rays,) bool
    fov_deg: float
    max_range: float

    @property
    def n_rays(self) -> int:
        return len(self.ranges)


@dataclass(frozen=True)
class EpisodeSpec:
    scene_id: str
    start: AgentPose
    goal_label: str
    goal_text: str
    seed: int = 0


def ray_bearings_deg(n_rays: int, fov_deg: float) -> np.ndarray:
    """Bearings relative to the heading, leftmost (+fov/2) first."""
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    if n_rays == 1:
        return np.zeros(1)
    return np.linspace(fov_deg / 2.0, -fov_deg / 2.0, n_rays)


# ---------------------------------------------------------------------------
# scene text format
# ---------------------------------------------------------------------------

def parse_scene(text: str, scene_id: str = "scene") -> SceneMap:
    """Parse the scene text format.

    Line 1: ``resolution <float>``; line 2: ``goals label=CHAR[, ...]``
    (possibly empty); remaining non-blank lines: the grid, '#' obstacle,
    '.' free, declared goal characters free-and-in-region.
    """
    lines = text.splitlines()
    if len(lines) < 1 or not lines[0].strip():
        raise SceneParseError("missing 'resolution' header", 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != "resolution":
        raise SceneParseError("expected 'resolution <float>'", 1)
    try:
        resolution = float(head[1])
    except ValueError:
        raise SceneParseError(f"bad resolution value {head[1]!r}", 1,
                              lines[0].index(head[1]) + 1) from None
    if not (resolution > 0 and math.isfinite(resolution)):
        raise SceneParseError("resolution must be a positive finite number", 1,
                              lines[0].index(head[1]) + 1)

    if len(lines) < 2 or not lines[1].split() or lines[1].split()[0] != "goals":
        raise SceneParseError("expected 'goals' header", 2)
    goal_chars: dict[str, str] = {}   # char -> label
    decl = lines[1].split(None, 1)[1] if len(lines[1].split(None, 1)) > 1 else ""
    if decl.strip():
        for part in decl.split(","):
            part = part.strip()
            col = lines[1].index(part.split("=")[0]) + 1 if part else 1
            if "=" not in part:
                raise SceneParseError(f"malformed goal declaration {part!r}", 2, col)
            label, _, char = part.partition("=")
            label = label.strip()
            char = char.strip()
            if not label or len(char) != 1:
                raise SceneParseError(f"malformed goal declaration {part!r}", 2, col)
            char_col = lines[1].index(char, col - 1) + 1
            if char == OBSTACLE_GLYPH:
                raise SceneParseError(f"goal {label!r} on obstacle glyph {OBSTACLE_GLYPH!r}",
                                      2, char_col)
            if char == FREE_GLYPH:
                raise SceneParseError(f"goal {label!r} uses reserved glyph {FREE_GLYPH!r}",
                                      2, char_col)
            if char in goal_chars:
                raise SceneParseError(f"goal glyph {char!r} declared twice", 2, char_col)
            if label in goal_chars.values():
                raise SceneParseError(f"goal label {label!r} declared twice", 2, col)
            goal_chars[char] = label

    rows: list[str] = []
    row_lines: list[int] = []
    for lineno, raw in enumerate(lines[2:], start=3):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        rows.append(line)
        row_lines.append(lineno)
    if not rows:
        raise SceneParseError("scene grid is empty", len(lines) + 1)
    width = len(rows[0])
    for row, lineno in zip(rows, row_lines):
        if len(row) != width:
            raise SceneParseError(
                f"ragged row: expected {width} cells, got {len(row)}",
                lineno, len(row) + 1)

    height = len(rows)
    obstacles = np.zeros((height, width), dtype=bool)
    regions: dict[str, set[tuple[int, int]]] = {label: set() for label in goal_chars.values()}
    for iy, (row, lineno) in enumerate(zip(rows, row_lines)):
        for ix, ch in enumerate(row):
            if ch == OBSTACLE_GLYPH:
                obstacles[iy, ix] = True
            elif ch == FREE_GLYPH:
                pass
            elif ch in goal_chars:
                regions[goal_chars[ch]].add((ix, iy))
            else:
                raise SceneParseError(f"unknown symbol {ch!r}", lineno, ix + 1)

    scene = SceneMap(
        scene_id=scene_id,
        resolution=resolution,
        obstacles=obstacles,
        goal_regions={label: frozenset(cells) for label, cells in regions.items()},
    )
    scene.validate()
    return scene


def load_scene(path: str | Path) -> SceneMap:
    path = Path(path)
    return parse_scene(path.read_text(), scene_id=path.stem)


def dump_scene(scene: SceneMap) -> str:
    """Inverse of parse_scene (goal glyphs are assigned A, B, ... by label order)."""
    glyphs = {}
    pool = iter("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
    for label in scene.goal_regions:
        glyphs[label] = next(pool)
    header = "resolution " + repr(scene.resolution)
    goals = "goals " + ", ".join(f"{label}={glyph}" for label, glyph in glyphs.items())
    cell_glyph = {}
    for label, cells in scene.goal_regions.items():
        for c in cells:
            cell_glyph[c] = glyphs[label]
    lines = []
    for iy in range(scene.height):
        row = []
        for ix in range(scene.width):
            if scene.obstacles[iy, ix]:
                row.append(OBSTACLE_GLYPH)
            else:
                row.append(cell_glyph.get((ix, iy), FREE_GLYPH))
        lines.append("".join(row))
    return "\n".join([header, goals.rstrip()] + lines) + "\n"


# ---------------------------------------------------------------------------
# sensing and motion
# ---------------------------------------------------------------------------

def scan_directions(pose: AgentPose, n_rays: int, fov_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit direction components for each ray of a scan from ``pose``."""
    angles = np.radians(pose.heading_deg + ray_bearings_deg(n_rays, fov_deg))
    return np.cos(angles), np.sin(angles)


def raycast_depth(scene: SceneMap, pose: AgentPose,
                  n_rays: int = DEFAULT_N_RAYS,
                  fov_deg: float = DEFAULT_FOV_DEG,
                  max_range: float = DEFAULT_MAX_RANGE_M) -> DepthScan:
    """Depth scan from ``pose``: distance to the first obstacle cell
    boundary along each ray, clamped to ``max_range`` (hit=False)."""
    dir_x, dir_y = scan_directions(pose, n_rays, fov_deg)
    ranges, hits = kernels.raycast(scene.obstacles_u8(), pose.x, pose.y,
                                   dir_x, dir_y, max_range, scene.resolution)
    return DepthScan(ranges=ranges, hits=hits.astype(bool),
                     fov_deg=fov_deg, max_range=max_range)


def step(scene: SceneMap, pose: AgentPose, action: Action) -> tuple[AgentPose, bool]:
    """Apply one action; returns (new pose, collision flag).

    Turns rotate in place by 30 degrees.  Forward translates 0.25 m with
    the segment checked at increments of at most half a cell; a blocked
    move leaves the pose unchanged and reports a collision.  Leaving the
    grid counts as a collision.
    """
    if action is Action.TURN_LEFT:
        return AgentPose(pose.x, pose.y, (pose.heading_deg + TURN_DEG) % 360.0), False
    if action is Action.TURN_RIGHT:
        return AgentPose(pose.x, pose.y, (pose.heading_deg - TURN_DEG) % 360.0), False
    if action is Action.STOP:
        return pose, False

    heading = math.radians(pose.heading_deg)
    dx = math.cos(heading)
    dy = math.sin(heading)
    n = max(1, math.ceil(FORWARD_STEP_M / (scene.resolution / 2.0)))
    for k in range(1, n + 1):
        t = FORWARD_STEP_M * k / n
        if not scene.is_free_point(pose.x + dx * t, pose.y + dy * t):
            return pose, True
    return AgentPose(pose.x + dx * FORWARD_STEP_M,
                     pose.y + dy * FORWARD_STEP_M,
                     pose.heading_deg), False


# ---------------------------------------------------------------------------
# ground-truth geodesics and visibility
# ---------------------------------------------------------------------------

def geodesic_field(scene: SceneMap, goal_cells) -> np.ndarray:
    """Fast-marching arrival distances from a goal cell set over the true
    free space; +inf where unreachable."""
    cells = sorted(goal_cells)
    if not cells:
        raise ValueError("goal cell set is empty")
    traversable = (~scene.obstacles).astype(np.uint8)
    for ix, iy in cells:
        if not scene.is_free_cell(ix, iy):
            raise ValueError(f"goal cell ({ix}, {iy}) is not a free cell")
    seeds = np.asarray(cells, dtype=np.int64)
    return kernels.fmm(traversable, seeds, scene.resolution)


def geodesic_distance(scene: SceneMap, start: AgentPose | tuple[int, int],
                      goal_cells) -> float:
    """Geodesic distance (meters) from a pose or cell to a goal cell set;
    0.0 inside the set, +inf if unreachable."""
    field = geodesic_field(scene, goal_cells)
    cell = start.cell(scene.resolution) if isinstance(start, AgentPose) else start
    if not scene.in_bounds(*cell):
        return math.inf
    return float(field[cell[1], cell[0]])


def line_of_sight(scene: SceneMap, x0: float, y0: float, x1: float, y1: float) -> bool:
    """True when the segment between two points crosses no obstacle cell."""
    dist = math.hypot(x1 - x0, y1 - y0)
    if dist == 0.0:
        return scene.is_free_point(x0, y0)
    dir_x = np.array([(x1 - x0) / dist])
    dir_y = np.array([(y1 - y0) / dist])
    ranges, hits = kernels.raycast(scene.obstacles_u8(), x0, y0,
                                   dir_x, dir_y, dist, scene.resolution)
    return not bool(hits[0])


def visible_goal_labels(scene: SceneMap, pose: AgentPose,
                        max_range: float = DEFAULT_MAX_RANGE_M) -> list[str]:
    """Labels whose region has at least one cell center visible from the
    pose within range; sorted for determinism."""
    seen = []
    for label, cells in scene.goal_regions.items():
        for cell in sorted(cells):
            cx, cy = scene.cell_center(cell)
            if math.hypot(cx - pose.x, cy - pose.y) > max_range:
                continue
            if line_of_sight(scene, pose.x, pose.y, cx, cy):
                seen.append(label)
                break
    return sorted(seen)
