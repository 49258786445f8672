"""Occupancy integration, guidance regions and projection, frontiers,
dilation, and the map export format."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navvlm.guidance import Guidance
from navvlm.mapping import (
    FREE,
    OBSTACLE,
    PGM_FREE,
    PGM_OBSTACLE,
    PGM_UNKNOWN,
    UNKNOWN,
    GuidanceProjectionError,
    ImageRegion,
    OccupancyGrid,
    dilate_obstacles,
    export_map,
    frontier_cells,
    integrate_scan,
    project_guidance,
    render_guidance_region,
)
from navvlm.scene import AgentPose, DepthScan


def _scan(ranges, hits, fov_deg=90.0, max_range=5.0):
    return DepthScan(ranges=np.asarray(ranges, dtype=float),
                     hits=np.asarray(hits, dtype=bool),
                     fov_deg=fov_deg, max_range=max_range)


# ---------------------------------------------------------------------------
# integrate_scan
# ---------------------------------------------------------------------------

def test_integrate_single_hit_ray_marks_cells_free_then_one_obstacle():
    """A ray of range 1.0 m at 0.05 m cells frees the 19 cells it crosses
    cleanly and marks obstacle at the 20th, where it stopped."""
    grid = OccupancyGrid.unknown(40, 40, 0.05)
    pose = AgentPose(x=0.025, y=0.525, heading_deg=0.0)
    scan = _scan([1.0], [True], fov_deg=0.0)
    out = integrate_scan(grid, pose, scan)
    row = out.cells[10]
    assert (row[0:20] == FREE).all()
    assert row[20] == OBSTACLE
    assert (row[21:] == UNKNOWN).all()


def test_integrate_miss_ray_marks_no_obstacle():
    grid = OccupancyGrid.unknown(40, 40, 0.05)
    pose = AgentPose(x=0.025, y=0.525, heading_deg=0.0)
    out = integrate_scan(grid, pose, _scan([1.0], [False], fov_deg=0.0))
    assert (out.cells == OBSTACLE).sum() == 0
    assert (out.cells[10, 0:20] == FREE).all()


def test_integrate_same_scan_twice_is_idempotent():
    grid = OccupancyGrid.unknown(40, 40, 0.05)
    pose = AgentPose(x=0.6, y=0.6, heading_deg=30.0)
    rng = np.random.default_rng(5)
    ranges = rng.uniform(0.3, 1.5, 30)
    hits = rng.random(30) < 0.6
    scan = _scan(ranges, hits)
    once = integrate_scan(grid, pose, scan)
    twice = integrate_scan(once, pose, scan)
    assert np.array_equal(once.cells, twice.cells)


def test_integrate_later_observation_wins_but_never_unknown():
    """Re-observation overwrites: a stale obstacle swept through by a
    longer ray becomes free, and nothing ever returns to unknown."""
    grid = OccupancyGrid.unknown(40, 40, 0.05)
    pose = AgentPose(x=0.025, y=0.525, heading_deg=0.0)
    hit_first = integrate_scan(grid, pose, _scan([0.5], [True], fov_deg=0.0))
    assert hit_first.cells[10, 10] == OBSTACLE
    swept = integrate_scan(hit_first, pose, _scan([2.0], [False], fov_deg=0.0))
    assert swept.cells[10, 10] == FREE
    assert (swept.cells != UNKNOWN).sum() >= (hit_first.cells != UNKNOWN).sum()


# ---------------------------------------------------------------------------
# render_guidance_region
# ---------------------------------------------------------------------------

def test_render_region_examples():
    left = render_guidance_region(Guidance.LEFT, 90.0)
    assert (left.bearing_min_deg, left.bearing_max_deg) == (15.0, 45.0)
    fwd = render_guidance_region(Guidance.FORWARD, 90.0)
    assert (fwd.bearing_min_deg, fwd.bearing_max_deg) == (-15.0, 15.0)
    right = render_guidance_region(Guidance.RIGHT, 120.0)
    assert (right.bearing_min_deg, right.bearing_max_deg) == (-60.0, -20.0)


def test_render_region_rejects_non_directional():
    with pytest.raises(ValueError):
        render_guidance_region(Guidance.EXPLORE, 90.0)
    with pytest.raises(ValueError):
        render_guidance_region(Guidance.NOINFO, 90.0)


@given(st.floats(min_value=10.0, max_value=360.0))
def test_render_regions_tile_the_fov(fov):
    """The three regions partition [-fov/2, fov/2] with no gaps or overlap
    beyond shared edges."""
    left = render_guidance_region(Guidance.LEFT, fov)
    fwd = render_guidance_region(Guidance.FORWARD, fov)
    right = render_guidance_region(Guidance.RIGHT, fov)
    assert right.bearing_min_deg == pytest.approx(-fov / 2, rel=1e-12)
    assert left.bearing_max_deg == pytest.approx(fov / 2, rel=1e-12)
    # interior edges are shared exactly
    assert right.bearing_max_deg == fwd.bearing_min_deg
    assert fwd.bearing_max_deg == left.bearing_min_deg
    for region in (left, fwd, right):
        assert region.bearing_min_deg <= region.bearing_max_deg
        assert region.band_m == (1.0, 3.0)


# ---------------------------------------------------------------------------
# project_guidance
# ---------------------------------------------------------------------------

def _open_grid(size=120, resolution=0.05):
    grid = OccupancyGrid.unknown(size, size, resolution)
    grid.cells[:, :] = FREE
    return grid


def test_project_forward_marks_band_far_cells_ahead():
    """In open space every selected ray reaches the far edge of the band,
    so the marks cluster around 3 m ahead of the pose."""
    grid = _open_grid()
    pose = AgentPose(x=0.5, y=3.0, heading_deg=0.0)
    ranges = [5.0] * 120
    hits = [False] * 120
    region = render_guidance_region(Guidance.FORWARD, 90.0)
    out, stg = project_guidance(grid, pose, _scan(ranges, hits), region, step=7)
    assert out.guidance_layer
    assert stg.cells == frozenset(out.guidance_layer)
    assert stg.created_at == 7
    for (ix, iy), stamp in out.guidance_layer.items():
        assert stamp == 7
        cx, cy = (ix + 0.5) * 0.05, (iy + 0.5) * 0.05
        d = math.hypot(cx - pose.x, cy - pose.y)
        assert 2.7 <= d <= 3.3                # 3 m minus/plus dilation slack
        bearing = math.degrees(math.atan2(cy - pose.y, cx - pose.x))
        assert -20.0 <= bearing <= 20.0


def test_project_clamps_hits_short_of_the_band_away():
    """A wall 0.5 m ahead leaves every forward ray short of the 1 m near
    bound; projection must refuse rather than mark unreachable cells."""
    grid = _open_grid()
    pose = AgentPose(x=0.5, y=3.0, heading_deg=0.0)
    ranges = [0.5] * 120
    hits = [True] * 120
    region = render_guidance_region(Guidance.FORWARD, 90.0)
    with pytest.raises(GuidanceProjectionError):
        project_guidance(grid, pose, _scan(ranges, hits), region, step=0)


def test_project_replaces_previous_marks():
    grid = _open_grid()
    pose = AgentPose(x=0.5, y=3.0, heading_deg=0.0)
    scan = _scan([5.0] * 120, [False] * 120)
    fwd = render_guidance_region(Guidance.FORWARD, 90.0)
    left = render_guidance_region(Guidance.LEFT, 90.0)
    once, _ = project_guidance(grid, pose, scan, fwd, step=5)
    twice, _ = project_guidance(once, pose, scan, left, step=9)
    assert twice.guidance_layer
    assert set(twice.guidance_layer.values()) == {9}
    for ix, iy in twice.guidance_layer:
        cx, cy = (ix + 0.5) * 0.05, (iy + 0.5) * 0.05
        bearing = math.degrees(math.atan2(cy - pose.y, cx - pose.x))
        assert bearing >= 10.0                 # left sector only


def test_project_skips_marks_inside_dilated_margin():
    """Rays grazing a wall obliquely would otherwise drop marks hugging
    it; those cells are unapproachable and must be discarded."""
    grid = _open_grid()
    grid.cells[0:2, :] = OBSTACLE              # wall along the top rows
    pose = AgentPose(x=0.5, y=0.35, heading_deg=0.0)
    ranges = [5.0] * 120
    hits = [False] * 120
    region = render_guidance_region(Guidance.FORWARD, 90.0)
    out, _ = project_guidance(grid, pose, _scan(ranges, hits), region, step=1)
    traversable = dilate_obstacles(out, 0.15)
    for ix, iy in out.guidance_layer:
        assert traversable[iy, ix]


def test_project_mid_band_hit_marks_standoff_cell():
    """A hit inside the band marks near the hit point, pulled back by the
    standoff, not at the far edge."""
    grid = _open_grid()
    pose = AgentPose(x=0.5, y=3.0, heading_deg=0.0)
    n = 120
    ranges = [2.0] * n
    hits = [True] * n
    region = render_guidance_region(Guidance.FORWARD, 90.0)
    out, _ = project_guidance(grid, pose, _scan(ranges, hits), region, step=2,
                              hit_standoff_m=0.25)
    assert out.guidance_layer
    dists = []
    for ix, iy in out.guidance_layer:
        cx, cy = (ix + 0.5) * 0.05, (iy + 0.5) * 0.05
        dists.append(math.hypot(cx - pose.x, cy - pose.y))
    assert min(dists) >= 1.0 - 0.11            # never under the near bound
    assert max(dists) <= 2.0                   # never past the hit itself


# ---------------------------------------------------------------------------
# frontier_cells
# ---------------------------------------------------------------------------

def test_frontier_ring_around_known_patch():
    """A known free 3x3 patch inside unknown space: every patch cell except
    the center touches unknown, giving the 8-cell ring."""
    grid = OccupancyGrid.unknown(5, 5, 0.05)
    grid.cells[1:4, 1:4] = FREE
    ring = frontier_cells(grid)
    want = {(ix, iy) for ix in (1, 2, 3) for iy in (1, 2, 3)} - {(2, 2)}
    assert ring == want
    assert len(ring) == 8


def test_frontier_empty_when_fully_known_or_fully_unknown():
    known = OccupancyGrid.unknown(4, 4, 0.05)
    known.cells[:, :] = FREE
    assert frontier_cells(known) == set()
    assert frontier_cells(OccupancyGrid.unknown(4, 4, 0.05)) == set()


def test_frontier_ignores_obstacle_boundaries():
    grid = OccupancyGrid.unknown(3, 3, 0.05)
    grid.cells[1, 1] = OBSTACLE
    assert frontier_cells(grid) == set()


# ---------------------------------------------------------------------------
# dilate_obstacles
# ---------------------------------------------------------------------------

def test_dilate_radius_zero_blocks_only_obstacles():
    grid = OccupancyGrid.unknown(5, 5, 0.05)
    grid.cells[:, :] = FREE
    grid.cells[2, 2] = OBSTACLE
    mask = dilate_obstacles(grid, 0.0)
    assert not mask[2, 2]
    assert mask.sum() == 24


def test_dilate_one_cell_blocks_four_neighbors():
    grid = OccupancyGrid.unknown(7, 7, 0.05)
    grid.cells[:, :] = FREE
    grid.cells[3, 3] = OBSTACLE
    mask = dilate_obstacles(grid, 0.05)
    blocked = {(ix, iy) for iy in range(7) for ix in range(7)
               if not mask[iy, ix]}
    assert blocked == {(3, 3), (2, 3), (4, 3), (3, 2), (3, 4)}


def test_dilate_boundary_distance_is_inclusive():
    """Cells at exactly the dilation radius are blocked: three cells at
    0.05 m resolution and radius 0.15 m."""
    grid = OccupancyGrid.unknown(11, 11, 0.05)
    grid.cells[:, :] = FREE
    grid.cells[5, 0] = OBSTACLE
    mask = dilate_obstacles(grid, 0.15)
    assert not mask[5, 3]                      # exactly 3 cells = 0.15 m
    assert mask[5, 4]


def test_dilate_huge_radius_blocks_everything():
    grid = OccupancyGrid.unknown(6, 6, 0.05)
    grid.cells[:, :] = FREE
    grid.cells[0, 0] = OBSTACLE
    mask = dilate_obstacles(grid, 10.0)
    assert not mask.any()


def test_dilate_treats_unknown_as_traversable():
    grid = OccupancyGrid.unknown(5, 5, 0.05)
    mask = dilate_obstacles(grid, 0.15)
    assert mask.all()


# ---------------------------------------------------------------------------
# export_map
# ---------------------------------------------------------------------------

def test_export_map_writes_pgm_and_sidecar(tmp_path):
    grid = OccupancyGrid.unknown(4, 3, 0.05)
    grid.cells[0, 1] = FREE
    grid.cells[2, 3] = OBSTACLE
    grid.guidance_layer[(1, 2)] = 4
    pgm = tmp_path / "map.pgm"
    sidecar = tmp_path / "map.txt"
    export_map(grid, pgm, sidecar, trajectory=((0.075, 0.025),))
    lines = pgm.read_text().splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "4 3"
    assert lines[2] == "255"
    pixels = [int(v) for row in lines[3:] for v in row.split()]
    assert pixels[1] == PGM_FREE
    assert pixels[11] == PGM_OBSTACLE
    assert pixels.count(PGM_UNKNOWN) == 10
    side = sidecar.read_text()
    assert "guidance" in side and "trajectory" in side
    assert f"{(1 + 0.5) * 0.05!r} {(2 + 0.5) * 0.05!r}" in side
    assert f"{0.075!r} {0.025!r}" in side
