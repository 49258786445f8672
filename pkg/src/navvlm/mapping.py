"""Agent-side occupancy mapping and guidance projection.

The grid distinguishes Unknown/Free/Obstacle per cell and carries a
guidance layer: cells most recently suggested by a directional guidance
reply, stamped with the step that produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels
from .scene import AgentPose, DepthScan, ray_bearings_deg

UNKNOWN = 0
FREE = 1
OBSTACLE = 2

DEFAULT_DILATION_RADIUS_M = 0.15
GUIDANCE_BAND_M = (1.0, 3.0)


class StgKind(Enum):
    GUIDED = "guided"
    FRONTIER = "frontier"


@dataclass(frozen=True)
class ImageRegion:
    """A bearing sector of the current view, paired with a depth band.

    Bearings are degrees relative to the heading, positive to the left;
    ``bearing_min <= bearing_max``.  The band is (near, far) in meters.
    """

    bearing_min_deg: float
    bearing_max_deg: float
    band_m: tuple[float, float] = GUIDANCE_BAND_M


@dataclass(frozen=True)
class ShortTermGoal:
    kind: StgKind
    cells: frozenset[tuple[int, int]]
    created_at: int


@dataclass
class OccupancyGrid:
    resolution: float
    cells: np.ndarray                                  # (H, W) uint8
    guidance_layer: dict[tuple[int, int], int] = field(default_factory=dict)

    @classmethod
    def unknown(cls, width: int, height: int, resolution: float) -> "OccupancyGrid":
        return cls(resolution=resolution,
                   cells=np.full((height, width), UNKNOWN, dtype=np.uint8))

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(resolution=self.resolution,
                             cells=self.cells.copy(),
                             guidance_layer=dict(self.guidance_layer))


def integrate_scan(grid: OccupancyGrid, pose: AgentPose, scan: DepthScan) -> OccupancyGrid:
    """Fold one depth scan into the grid and return the updated grid.

    Cells crossed before a ray's endpoint become Free; the endpoint cell
    becomes Obstacle exactly when the ray hit.  Later writes win, and a
    cell never returns to Unknown.  Integrating the same scan twice is a
    no-op the second time.
    """
    out = grid.copy()
    angles = np.radians(pose.heading_deg + ray_bearings_deg(scan.n_rays, scan.fov_deg))
    kernels.integrate(out.cells, pose.x, pose.y,
                      np.cos(angles), np.sin(angles),
                      np.asarray(scan.ranges, dtype=np.float64),
                      np.asarray(scan.hits, dtype=np.uint8),
                      grid.resolution, FREE, OBSTACLE)
    return out


def render_guidance_region(guidance, fov_deg: float,
                           band_m: tuple[float, float] = GUIDANCE_BAND_M) -> ImageRegion:
    """Map a directional reply onto a third of the field of view.

    Left covers [fov/6, fov/2], Forward [-fov/6, fov/6], Right
    [-fov/2, -fov/6]; non-directional guidance is a caller bug here.
    """
    from .guidance import Guidance  # local import to avoid a module cycle

    sixth = fov_deg / 6.0
    if guidance is Guidance.LEFT:
        return ImageRegion(sixth, 3.0 * sixth, band_m)
    if guidance is Guidance.FORWARD:
        return ImageRegion(-sixth, sixth, band_m)
    if guidance is Guidance.RIGHT:
        return ImageRegion(-3.0 * sixth, -sixth, band_m)
    raise ValueError(f"cannot render a region for non-directional guidance {guidance}")


class GuidanceProjectionError(ValueError):
    """No sector ray reaches the guidance depth band."""


def project_guidance(grid: OccupancyGrid, pose: AgentPose, scan: DepthScan,
                     region: ImageRegion, step: int,
                     hit_standoff_m: float = 0.2,
                     dilation_radius_m: float = DEFAULT_DILATION_RADIUS_M,
                     ) -> tuple[OccupancyGrid, ShortTermGoal]:
    """Project an image region into map cells and stamp the guidance layer.

    Each sector ray contributes the point at min(range, band far); a ray
    that hit an obstacle is pulled back by ``hit_standoff_m`` first, so
    the mark lands on approachable floor instead of the wall face.  Rays
    ending short of the band near edge contribute nothing, and marks that
    still fall inside the dilated obstacle margin are discarded -- an
    oblique ray grazing a wall would otherwise leave unapproachable marks
    hugging it.  Marked cells are the containing cells dilated by one
    cell, clipped to the grid; previous guidance marks are cleared.
    Raises GuidanceProjectionError when no approachable mark remains.
    """
    bearings = ray_bearings_deg(scan.n_rays, scan.fov_deg)
    sel = (bearings >= region.bearing_min_deg) & (bearings <= region.bearing_max_deg)
    near, far = region.band_m
    h = grid.resolution
    traversable = dilate_obstacles(grid, dilation_radius_m)

    marked: set[tuple[int, int]] = set()
    angles = np.radians(pose.heading_deg + bearings)
    ranges = np.asarray(scan.ranges, dtype=np.float64)
    hits = np.asarray(scan.hits, dtype=bool)
    for k in np.flatnonzero(sel):
        reach = float(ranges[k]) - (hit_standoff_m if hits[k] else 0.0)
        d = min(reach, far)
        if d < near:
            continue
        px = pose.x + math.cos(angles[k]) * d
        py = pose.y + math.sin(angles[k]) * d
        ix = int(math.floor(px / h))
        iy = int(math.floor(py / h))
        if not (grid.in_bounds(ix, iy) and traversable[iy, ix]):
            continue
        for jy in range(iy - 1, iy + 2):
            for jx in range(ix - 1, ix + 2):
                if grid.in_bounds(jx, jy) and traversable[jy, jx]:
                    marked.add((jx, jy))
    if not marked:
        raise GuidanceProjectionError(
            f"no ray in sector [{region.bearing_min_deg:.1f}, "
            f"{region.bearing_max_deg:.1f}] deg reaches the {region.band_m} m band")

    out = grid.copy()
    out.guidance_layer = {cell: step for cell in marked}
    return out, ShortTermGoal(kind=StgKind.GUIDED, cells=frozenset(marked), created_at=step)


def frontier_cells(grid: OccupancyGrid) -> set[tuple[int, int]]:
    """Free cells 4-adjacent to at least one Unknown cell."""
    free = grid.cells == FREE
    unknown = grid.cells == UNKNOWN
    near_unknown = np.zeros_like(unknown)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    iys, ixs = np.nonzero(free & near_unknown)
    return {(int(ix), int(iy)) for ix, iy in zip(ixs, iys)}


def dilate_obstacles(grid: OccupancyGrid,
                     radius_m: float = DEFAULT_DILATION_RADIUS_M) -> np.ndarray:
    """Traversability mask for planning: False within ``radius_m``
    (Euclidean, cell centers) of any Obstacle cell.  Unknown cells remain
    traversable so the planner can push through unexplored space."""
    obstacle = grid.cells == OBSTACLE
    if not obstacle.any():
        return np.ones_like(obstacle)
    dist = ndimage.distance_transform_edt(~obstacle, sampling=grid.resolution)
    # inclusive boundary: a cell at exactly radius_m is blocked even when
    # the transform accumulates a last-ulp excess (e.g. 3 * 0.05 > 0.15)
    return dist > radius_m * (1.0 + 1e-9)


# ---------------------------------------------------------------------------
# snapshot export
# ---------------------------------------------------------------------------

PGM_OBSTACLE = 0
PGM_UNKNOWN = 128
PGM_FREE = 255


def write_pgm(path: str | Path, values: np.ndarray, maxval: int = 255) -> None:
    """Plain (P2) PGM writer."""
    values = np.asarray(values)
    lines = ["P2", f"{values.shape[1]} {values.shape[0]}", str(maxval)]
    for row in values:
        lines.append(" ".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def export_map(grid: OccupancyGrid, pgm_path: str | Path, sidecar_path: str | Path,
               trajectory: list[tuple[float, float]]) -> None:
    """Write the grid as P2 PGM (0 obstacle, 128 unknown, 255 free) plus a
    sidecar listing guidance cells and the trajectory as ``x y`` meter
    pairs per line."""
    values = np.full(grid.cells.shape, PGM_UNKNOWN, dtype=np.int64)
    values[grid.cells == FREE] = PGM_FREE
    values[grid.cells == OBSTACLE] = PGM_OBSTACLE
    write_pgm(pgm_path, values)

    h = grid.resolution
    lines = ["# guidance cells (x y meters)"]
    for ix, iy in sorted(grid.guidance_layer):
        lines.append(f"{(ix + 0.5) * h!r} {(iy + 0.5) * h!r}")
    lines.append("# trajectory (x y meters)")
    for x, y in trajectory:
        lines.append(f"{x!r} {y!r}")
    Path(sidecar_path).write_text("\n".join(lines) + "\n")
