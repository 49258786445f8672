"""Travel-time planning: fast-marching distance fields, steepest-descent
path extraction, discrete action selection, and nearest-frontier choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mapping import OccupancyGrid, ShortTermGoal, StgKind, write_pgm
from .scene import FORWARD_STEP_M, TURN_DEG, Action, AgentPose

LOOKAHEAD_M = FORWARD_STEP_M / 2
TURN_THRESHOLD_DEG = TURN_DEG / 2

# steepest-descent neighbor scan order: E, N, W, S, NE, NW, SW, SE
_DESCENT_ORDER = ((1, 0), (0, 1), (-1, 0), (0, -1),
                  (1, 1), (-1, 1), (-1, -1), (1, -1))


class UnreachableError(RuntimeError):
    """Path extraction started from a cell the field never reached."""


@dataclass(frozen=True)
class DistanceField:
    """Arrival distances from a source set, +inf where unreached."""
    t: np.ndarray
    source: frozenset[tuple[int, int]]
    resolution: float

    def at(self, cell: tuple[int, int]) -> float:
        ix, iy = cell
        height, width = self.t.shape
        if not (0 <= ix < width and 0 <= iy < height):
            return math.inf
        return float(self.t[iy, ix])


@dataclass(frozen=True)
class PathPlan:
    """Cell path from the start cell down to a source cell."""
    cells: tuple[tuple[int, int], ...]
    resolution: float

    @property
    def waypoints(self) -> tuple[tuple[float, float], ...]:
        """Waypoint cell centers in meters, start first."""
        h = self.resolution
        return tuple(((ix + 0.5) * h, (iy + 0.5) * h) for ix, iy in self.cells)


def fmm_solve(mask: np.ndarray, source, h: float) -> DistanceField:
    """Solve the Eikonal equation |grad T| = 1 on the traversable cells.

    mask is (H, W) boolean, True where traversable; source is a set of
    (ix, iy) cells, each of which must be traversable.
    """
    cells = sorted(set((int(ix), int(iy)) for ix, iy in source))
    if not cells:
        raise ValueError("source set is empty")
    height, width = mask.shape
    for ix, iy in cells:
        if not (0 <= ix < width and 0 <= iy < height):
            raise ValueError(f"source cell ({ix}, {iy}) is out of bounds")
        if not mask[iy, ix]:
            raise ValueError(f"source cell ({ix}, {iy}) is not traversable")
    seeds = np.array(cells, dtype=np.int64).reshape(-1, 2)
    t = kernels.fmm(np.ascontiguousarray(mask, dtype=np.uint8), seeds, h)
    return DistanceField(t=t, source=frozenset(cells), resolution=h)


def extract_path(field: DistanceField, start: tuple[int, int]) -> PathPlan:
    """Greedy steepest descent from start to a source cell.

    Each hop moves to the 8-neighbor with the smallest T, required to be
    strictly below the current value; ties keep the first hit in the
    fixed scan order E, N, W, S, NE, NW, SW, SE.  Strict decrease bounds
    the walk by the number of finite cells.
    """
    t = field.t
    height, width = t.shape
    ix, iy = int(start[0]), int(start[1])
    here = field.at((ix, iy))
    if not math.isfinite(here):
        raise UnreachableError(f"cell ({ix}, {iy}) is unreachable from the source set")
    cells = [(ix, iy)]
    while here > 0.0:
        best = here
        best_cell = None
        for dx, dy in _DESCENT_ORDER:
            nx, ny = ix + dx, iy + dy
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            tn = t[ny, nx]
            if tn < best:
                best = tn
                best_cell = (nx, ny)
        if best_cell is None:
            # non-source local minimum: cannot happen for fields produced
            # by fmm_solve, but guard against a hand-built field
            break
        ix, iy = best_cell
        here = best
        cells.append(best_cell)
    return PathPlan(cells=tuple(cells), resolution=field.resolution)


def _wrap_deg(angle: float) -> float:
    """Wrap to (-180, 180]."""
    wrapped = math.fmod(angle, 360.0)
    if wrapped > 180.0:
        wrapped -= 360.0
    elif wrapped <= -180.0:
        wrapped += 360.0
    return wrapped


def next_action(pose: AgentPose, plan: PathPlan) -> Action:
    """Pick the discrete action steering the agent along the plan.

    Aims at the first waypoint at least half a forward step away (the
    whole plan may be closer; then the final waypoint serves).  A bearing
    error within +/-15 degrees, boundary inclusive, is close enough to
    walk; otherwise turn toward the sign of the error.
    """
    if not plan.cells:
        raise ValueError("plan has no waypoints")
    target = plan.waypoints[-1]
    for wx, wy in plan.waypoints:
        if math.hypot(wx - pose.x, wy - pose.y) >= LOOKAHEAD_M:
            target = (wx, wy)
            break
    bearing = math.degrees(math.atan2(target[1] - pose.y, target[0] - pose.x))
    error = _wrap_deg(bearing - pose.heading_deg)
    if abs(error) <= TURN_THRESHOLD_DEG:
        return Action.FORWARD
    return Action.TURN_LEFT if error > 0.0 else Action.TURN_RIGHT


def select_frontier(grid: OccupancyGrid, mask: np.ndarray, pose: AgentPose,
                    frontiers, step: int = 0) -> ShortTermGoal:
    """Choose the frontier nearest by travel time from the agent.

    Solves one field from the agent cell and picks the frontier with the
    smallest finite T (ties row-major), returned together with its
    8-neighborhood.  An empty or fully unreachable frontier set — or an
    agent cell the mask itself forbids — degenerates to the agent's own
    cell, which the caller reads as exploration exhausted.
    """
    agent_cell = pose.cell(grid.resolution)
    degenerate = ShortTermGoal(kind=StgKind.FRONTIER,
                               cells=frozenset({agent_cell}),
                               created_at=step)
    ax, ay = agent_cell
    height, width = mask.shape
    if not (0 <= ax < width and 0 <= ay < height) or not mask[ay, ax]:
        return degenerate
    candidates = sorted(set(frontiers), key=lambda c: (c[1], c[0]))
    if not candidates:
        return degenerate
    field = fmm_solve(mask, {agent_cell}, grid.resolution)
    best = None
    best_t = math.inf
    for cell in candidates:
        t = field.at(cell)
        if math.isfinite(t) and t < best_t:
            best_t = t
            best = cell
    if best is None:
        return degenerate
    bx, by = best
    cells = {best}
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            nx, ny = bx + dx, by + dy
            if 0 <= nx < width and 0 <= ny < height:
                cells.add((nx, ny))
    return ShortTermGoal(kind=StgKind.FRONTIER, cells=frozenset(cells),
                         created_at=step)


def field_to_pgm(field: DistanceField, path) -> None:
    """Debug dump: T scaled to 0-255 over the finite range, +inf as 255."""
    t = field.t
    finite = np.isfinite(t)
    img = np.full(t.shape, 255, dtype=np.uint8)
    if finite.any():
        top = float(t[finite].max())
        scale = 255.0 / top if top > 0 else 0.0
        img[finite] = np.minimum(np.rint(t[finite] * scale), 255).astype(np.uint8)
    write_pgm(path, img)
