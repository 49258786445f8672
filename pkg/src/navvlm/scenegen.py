"""Seeded random scene generation: walled arenas with rectangular block
obstacles, a labeled goal patch, and a start pose verified reachable
through the dilated free space before anything is written.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import planner
from . import scene as scenemod
from .mapping import DEFAULT_DILATION_RADIUS_M
from .scene import AgentPose, EpisodeSpec, SceneMap

DEFAULT_RESOLUTION_M = 0.05
# block-to-block and block-to-wall clearance: wide enough that a 0.15 m
# dilation leaves a usable channel
CLEARANCE_CELLS = 10
GOAL_CLEARANCE_CELLS = 6
BLOCK_SIDE_CELLS = (6, 16)
GOAL_SIDE_FRACTION = 0.3
MIN_START_GOAL_M = 1.2
MIN_START_EUCLID_M = 1.1
HEADINGS_DEG = tuple(float(k * 30) for k in range(12))
GOAL_WORDS = ("box", "chair", "plant", "lamp", "table", "sofa", "shelf",
              "sink", "bed", "desk")

_MAX_SCENE_TRIES = 40
_MAX_PLACE_TRIES = 200


class SceneGenerationError(RuntimeError):
    """Generation could not satisfy the layout constraints."""


@dataclass(frozen=True)
class GeneratedScene:
    scene: SceneMap
    text: str
    episode: EpisodeSpec


def _rect_gap_ok(a: tuple[int, int, int, int], b: tuple[int, int, int, int],
                 gap: int) -> bool:
    """Chebyshev clearance between two (x0, y0, w, h) rectangles."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    dx = max(bx - (ax + aw), ax - (bx + bw), 0)
    dy = max(by - (ay + ah), ay - (by + bh), 0)
    return max(dx, dy) >= gap


def _place_goal(rng: random.Random, size: int) -> tuple[int, int, int] | None:
    """Pick a centre-biased square goal patch: (x0, y0, side) in cells."""
    side = max(3, min(22, round(size * GOAL_SIDE_FRACTION) + rng.randint(-1, 1)))
    lo = 1 + GOAL_CLEARANCE_CELLS
    hi = size - 1 - GOAL_CLEARANCE_CELLS - side
    if hi < lo:
        return None
    quarter = max(1, size // 4)
    cx = size // 2 + rng.randint(-quarter // 2, quarter // 2)
    cy = size // 2 + rng.randint(-quarter // 2, quarter // 2)
    x0 = min(hi, max(lo, cx - side // 2))
    y0 = min(hi, max(lo, cy - side // 2))
    return (x0, y0, side)


def _place_blocks(rng: random.Random, size: int, density: float,
                  goal_rect: tuple[int, int, int]) -> np.ndarray:
    """Walled border plus non-adjacent rectangular blocks approaching the
    requested obstacle density (best effort under the clearance rules)."""
    obstacles = np.zeros((size, size), dtype=bool)
    obstacles[0, :] = obstacles[-1, :] = True
    obstacles[:, 0] = obstacles[:, -1] = True
    budget = int(density * size * size) - int(obstacles.sum())

    gx, gy, gside = goal_rect
    keep_out = (gx, gy, gside, gside)
    blocks: list[tuple[int, int, int, int]] = []
    tries = 0
    while budget > 0 and tries < _MAX_PLACE_TRIES:
        tries += 1
        w = rng.randint(*BLOCK_SIDE_CELLS)
        h = rng.randint(*BLOCK_SIDE_CELLS)
        lo = 1 + CLEARANCE_CELLS
        hix = size - 1 - CLEARANCE_CELLS - w
        hiy = size - 1 - CLEARANCE_CELLS - h
        if hix < lo or hiy < lo:
            continue
        rect = (rng.randint(lo, hix), rng.randint(lo, hiy), w, h)
        if (_rect_gap_ok(rect, keep_out, GOAL_CLEARANCE_CELLS)
                and all(_rect_gap_ok(rect, other, CLEARANCE_CELLS)
                        for other in blocks)):
            x0, y0, bw, bh = rect
            obstacles[y0:y0 + bh, x0:x0 + bw] = True
            blocks.append(rect)
            budget -= bw * bh
    return obstacles


def _traversable(obstacles: np.ndarray, resolution: float) -> np.ndarray:
    dist = ndimage.distance_transform_edt(~obstacles, sampling=resolution)
    return dist > DEFAULT_DILATION_RADIUS_M * (1.0 + 1e-9)


def generate_scene(index: int, seed: int, size: int, density: float,
                   resolution: float = DEFAULT_RESOLUTION_M) -> GeneratedScene:
    """Generate one scene plus a start/goal episode, deterministically.

    The start is drawn from cells that the dilated free space connects to
    the goal patch, at least MIN_START_GOAL_M away from it.  Raises
    SceneGenerationError when the constraints cannot be met.
    """
    if not 0.0 <= density <= 0.4:
        raise ValueError("density must be within [0, 0.4]")
    if size < 8:
        raise ValueError("size must be at least 8")

    arena_m = size * resolution
    min_geodesic = min(MIN_START_GOAL_M, 0.35 * arena_m)
    min_euclid = min(MIN_START_EUCLID_M, 0.3 * arena_m)

    scene_id = f"scene_{index:03d}"
    for attempt in range(_MAX_SCENE_TRIES):
        rng = random.Random(f"{seed}:{index}:{attempt}")
        goal_rect = _place_goal(rng, size)
        if goal_rect is None:
            continue
        obstacles = _place_blocks(rng, size, density, goal_rect)
        gx, gy, gside = goal_rect
        goal_cells = frozenset((gx + dx, gy + dy)
                               for dx in range(gside) for dy in range(gside))

        label = rng.choice(GOAL_WORDS)
        scene = SceneMap(scene_id=scene_id, resolution=resolution,
                         obstacles=obstacles, goal_regions={label: goal_cells})

        mask = _traversable(obstacles, resolution)
        goal_sources = {c for c in goal_cells if mask[c[1], c[0]]}
        if not goal_sources:
            continue
        reach = planner.fmm_solve(mask, goal_sources, resolution)
        true_field = scenemod.geodesic_field(scene, goal_cells)

        centers = np.asarray(sorted(goal_cells), dtype=float)
        centers = (centers + 0.5) * resolution
        candidates = []
        for iy in range(size):
            for ix in range(size):
                if not (math.isfinite(reach.t[iy, ix])
                        and true_field[iy, ix] >= min_geodesic):
                    continue
                px, py = (ix + 0.5) * resolution, (iy + 0.5) * resolution
                d2 = np.min((centers[:, 0] - px) ** 2 + (centers[:, 1] - py) ** 2)
                if d2 > min_euclid * min_euclid:
                    candidates.append((ix, iy))
        if not candidates:
            continue

        sx, sy = candidates[rng.randrange(len(candidates))]
        start = AgentPose(x=(sx + 0.5) * resolution,
                          y=(sy + 0.5) * resolution,
                          heading_deg=rng.choice(HEADINGS_DEG))
        episode = EpisodeSpec(scene_id=scene_id, start=start,
                              goal_label=label, goal_text=f"the {label}",
                              seed=seed)
        return GeneratedScene(scene=scene, text=scenemod.dump_scene(scene),
                              episode=episode)

    raise SceneGenerationError(
        f"could not generate a reachable scene for index {index} "
        f"(size={size}, density={density}) in {_MAX_SCENE_TRIES} attempts")


def generate_batch(count: int, seed: int, size: int, density: float,
                   resolution: float = DEFAULT_RESOLUTION_M) -> list[GeneratedScene]:
    return [generate_scene(i, seed, size, density, resolution)
            for i in range(count)]
