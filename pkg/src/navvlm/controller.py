"""Episode controller: the observe / query / map / plan / act loop, the
termination rules, and the SR and SPL metrics.

The loop per iteration: cast a depth scan; on cadence steps ask the
oracle whether to stop; fuse the scan into the map; on cadence steps ask
for a direction and project directional guidance onto the map; pick the
short-term goal (fresh or retained guidance, else nearest frontier);
solve or reuse the travel-time field through the dilated map and walk
one action toward the goal.  Every episode ends in at most ``max_steps``
actions no matter what the oracle replies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import mapping, planner
from . import scene as scenemod
from .guidance import (OracleRequest, PromptKind, SceneSnapshot,
                       TerminateVerdict, query_direction, query_termination)
from .mapping import (DEFAULT_DILATION_RADIUS_M, GUIDANCE_BAND_M,
                      GuidanceProjectionError, OccupancyGrid, ShortTermGoal,
                      StgKind)
from .scene import (DEFAULT_FOV_DEG, DEFAULT_MAX_RANGE_M, DEFAULT_N_RAYS,
                    Action, AgentPose, EpisodeSpec, SceneMap)


class TerminationCause(Enum):
    VLM_STOP = "vlm_stop"
    REACHED_GUIDED = "reached_guided"
    REACHED_FRONTIER_EXHAUSTED = "reached_frontier_exhausted"
    MAX_STEPS = "max_steps"
    PLANNER_STUCK = "planner_stuck"


@dataclass(frozen=True)
class EpisodeConfig:
    """Episode knobs; defaults are the evaluation standard."""
    max_steps: int = 500
    success_radius_m: float = 1.0
    oracle_cadence: int = 1
    replan_interval: int = 5
    stg_reach_threshold_m: float = 0.25
    n_rays: int = DEFAULT_N_RAYS
    fov_deg: float = DEFAULT_FOV_DEG
    max_range_m: float = DEFAULT_MAX_RANGE_M
    dilation_radius_m: float = DEFAULT_DILATION_RADIUS_M
    guidance_band_m: tuple[float, float] = GUIDANCE_BAND_M

    def __post_init__(self):
        for name in ("max_steps", "success_radius_m", "oracle_cadence",
                     "replan_interval", "stg_reach_threshold_m", "n_rays",
                     "fov_deg", "max_range_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.dilation_radius_m < 0:
            raise ValueError("dilation_radius_m must be non-negative")


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    steps: int
    path_length_m: float
    shortest_length_m: float
    termination_cause: TerminationCause
    collision_count: int
    log_lines: tuple[str, ...] = field(repr=False, default=())
    trajectory: tuple[tuple[float, float], ...] = field(repr=False, default=())
    final_grid: OccupancyGrid | None = field(repr=False, default=None)

    @property
    def spl_term(self) -> float:
        """This episode's contribution to SPL before averaging."""
        if not self.success:
            return 0.0
        l, p = self.shortest_length_m, self.path_length_m
        if not math.isfinite(l):
            raise ValueError(
                "degenerate successful episode: shortest length is infinite "
                "(goal region unreachable from the start; scene authoring "
                "must keep goals reachable)")
        if l == 0.0 and p == 0.0:
            return 1.0
        return l / max(p, l)

    def result_line(self) -> str:
        l = self.shortest_length_m
        payload = {
            "success": self.success,
            "steps": self.steps,
            "path_length": self.path_length_m,
            "shortest_length": l if math.isfinite(l) else None,
            "termination_cause": self.termination_cause.value,
            "collision_count": self.collision_count,
        }
        return json.dumps({"result": payload})

    def to_jsonl(self) -> str:
        return "\n".join((*self.log_lines, self.result_line())) + "\n"


def check_reached(pose: AgentPose, stg: ShortTermGoal, threshold_m: float,
                  resolution: float) -> bool:
    """Whether the pose is within ``threshold_m`` (inclusive) of the
    nearest short-term-goal cell center."""
    best = math.inf
    for ix, iy in stg.cells:
        cx = (ix + 0.5) * resolution
        cy = (iy + 0.5) * resolution
        best = min(best, math.hypot(cx - pose.x, cy - pose.y))
    return best <= threshold_m


def _log_line(t: int, pose: AgentPose, action: str, guidance: str,
              stg_kind: str, verdict: str, collision: bool) -> str:
    return json.dumps({
        "t": t,
        "x": pose.x,
        "y": pose.y,
        "heading": pose.heading_deg,
        "action": action,
        "guidance": guidance,
        "stg_kind": stg_kind,
        "verdict": verdict,
        "collision": collision,
    })


def _traversability(grid: OccupancyGrid, pose: AgentPose,
                    radius_m: float) -> np.ndarray:
    """Dilated traversability mask with the agent's own footprint cleared.

    Dilation may swallow the cell the agent physically stands on (it is a
    point, walls are fat); cells near the pose are re-opened unless the
    map knows them to be obstacles.
    """
    mask = mapping.dilate_obstacles(grid, radius_m)
    if radius_m <= 0.0:
        return mask
    h = grid.resolution
    reach = int(math.ceil(radius_m / h)) + 1
    ax, ay = pose.cell(h)
    for iy in range(max(0, ay - reach), min(grid.height, ay + reach + 1)):
        for ix in range(max(0, ax - reach), min(grid.width, ax + reach + 1)):
            if mask[iy, ix] or grid.cells[iy, ix] == mapping.OBSTACLE:
                continue
            cx, cy = (ix + 0.5) * h, (iy + 0.5) * h
            if math.hypot(cx - pose.x, cy - pose.y) <= radius_m:
                mask[iy, ix] = True
    return mask


def run_episode(scene: SceneMap, spec: EpisodeSpec, oracle,
                config: EpisodeConfig = EpisodeConfig()) -> EpisodeResult:
    """Run one episode to termination and return its result.

    Fully deterministic for a fixed (scene, spec, oracle, config): the
    step log is byte-identical across runs.
    """
    if spec.goal_label not in scene.goal_regions:
        raise ValueError(f"scene {scene.scene_id!r} has no goal region "
                         f"{spec.goal_label!r}")
    goal_cells = scene.goal_regions[spec.goal_label]
    shortest = scenemod.geodesic_distance(scene, spec.start, goal_cells)

    pose = spec.start
    grid = OccupancyGrid.unknown(scene.width, scene.height, scene.resolution)
    guided_stg: ShortTermGoal | None = None
    cause = TerminationCause.MAX_STEPS
    field_cache: planner.DistanceField | None = None
    field_for: tuple[StgKind, frozenset] | None = None
    field_age = 0
    turn_bias: Action | None = None
    planning_failures = 0
    steps = 0
    path_length = 0.0
    collisions = 0
    log: list[str] = []
    trajectory = [(pose.x, pose.y)]

    t = 0
    while True:
        if t >= config.max_steps:
            cause = TerminationCause.MAX_STEPS
            break

        scan = scenemod.raycast_depth(scene, pose, config.n_rays,
                                      config.fov_deg, config.max_range_m)
        query_step = (t % config.oracle_cadence == 0)
        guidance_str = "none"
        verdict_str = "none"
        snapshot = None
        if query_step:
            oracle.observe(pose)
            snapshot = SceneSnapshot(
                ranges=tuple(float(r) for r in scan.ranges),
                fov_deg=config.fov_deg,
                visible_labels=tuple(scenemod.visible_goal_labels(
                    scene, pose, config.max_range_m)),
            )
            verdict = query_termination(oracle, OracleRequest(
                PromptKind.TERMINATION_CHECK, spec.goal_text, t,
                snapshot=snapshot))
            verdict_str = verdict.value
            if verdict is TerminateVerdict.STOP:
                cause = TerminationCause.VLM_STOP
                log.append(_log_line(t, pose, Action.STOP.value, guidance_str,
                                     "none", verdict_str, False))
                break

        grid = mapping.integrate_scan(grid, pose, scan)

        if query_step:
            advice = query_direction(oracle, OracleRequest(
                PromptKind.DIRECTION_QUERY, spec.goal_text, t,
                snapshot=snapshot))
            guidance_str = advice.value
            if advice.is_directional:
                region = mapping.render_guidance_region(
                    advice, config.fov_deg, config.guidance_band_m)
                try:
                    # stand marks off walls far enough that the dilated
                    # map keeps the guided cells approachable even when a
                    # rescan shifts the observed boundary by a cell
                    grid, guided_stg = mapping.project_guidance(
                        grid, pose, scan, region, t,
                        hit_standoff_m=config.dilation_radius_m
                        + 2 * grid.resolution,
                        dilation_radius_m=config.dilation_radius_m)
                except GuidanceProjectionError:
                    pass  # nothing projectable: same as an Explore reply

        mask = _traversability(grid, pose, config.dilation_radius_m)
        agent_cell = pose.cell(grid.resolution)

        if guided_stg is not None:
            # guidance projected onto cells the dilated map forbids is
            # useless for planning; fall back to exploration
            if not any(grid.in_bounds(*c) and mask[c[1], c[0]]
                       for c in guided_stg.cells):
                guided_stg = None

        if guided_stg is not None:
            stg = guided_stg
        else:
            stg = planner.select_frontier(grid, mask,
                                          pose, mapping.frontier_cells(grid),
                                          step=t)
            if stg.cells == frozenset({agent_cell}):
                cause = TerminationCause.REACHED_FRONTIER_EXHAUSTED
                break
            if check_reached(pose, stg, config.stg_reach_threshold_m,
                             grid.resolution):
                # a frontier at the agent's feet needs a look, not a move:
                # rotate so the next scans can claim the unknown behind it
                turn_bias = turn_bias or Action.TURN_LEFT
                pose, _ = scenemod.step(scene, pose, turn_bias)
                steps += 1
                log.append(_log_line(t, pose, turn_bias.value,
                                     guidance_str, stg.kind.value,
                                     verdict_str, False))
                trajectory.append((pose.x, pose.y))
                t += 1
                continue

        plan = None
        sources = {c for c in stg.cells
                   if grid.in_bounds(*c) and mask[c[1], c[0]]}
        if sources:
            key = (stg.kind, frozenset(sources))
            if field_cache is None or key != field_for \
                    or field_age >= config.replan_interval:
                field_cache = planner.fmm_solve(mask, sources, grid.resolution)
                field_for = key
                field_age = 0
            try:
                plan = planner.extract_path(field_cache, agent_cell)
            except planner.UnreachableError:
                plan = None

        if plan is None:
            planning_failures += 1
            if planning_failures >= 2:
                cause = TerminationCause.PLANNER_STUCK
                break
            # recovery: drop stale guidance, turn to scan new ground
            if stg.kind is StgKind.GUIDED:
                guided_stg = None
            field_cache = None
            turn_bias = turn_bias or Action.TURN_LEFT
            pose, _ = scenemod.step(scene, pose, turn_bias)
            steps += 1
            log.append(_log_line(t, pose, turn_bias.value,
                                 guidance_str, stg.kind.value, verdict_str,
                                 False))
            trajectory.append((pose.x, pose.y))
            t += 1
            continue

        planning_failures = 0
        field_age += 1
        action = planner.next_action(pose, plan)
        if action is Action.FORWARD:
            turn_bias = None
        else:
            # commit to one turning direction until a plan moves us
            # forward again; re-deciding left/right from scratch each step
            # lets two alternating short-term goals cancel forever
            turn_bias = turn_bias or action
            action = turn_bias
        new_pose, collided = scenemod.step(scene, pose, action)
        if action is Action.FORWARD and not collided:
            path_length += math.hypot(new_pose.x - pose.x, new_pose.y - pose.y)
        pose = new_pose
        steps += 1
        if collided:
            collisions += 1
            # the bump itself is an observation: something blocks the cell
            # ahead; without recording it the same plan repeats forever
            grid = _mark_bump(grid, pose)
            field_cache = None
        log.append(_log_line(t, pose, action.value, guidance_str,
                             stg.kind.value, verdict_str, collided))
        trajectory.append((pose.x, pose.y))

        if stg.kind is StgKind.GUIDED and check_reached(
                pose, stg, config.stg_reach_threshold_m, grid.resolution):
            cause = TerminationCause.REACHED_GUIDED
            break
        t += 1

    success = _within_goal(scene, pose, goal_cells, config.success_radius_m)
    return EpisodeResult(
        success=success,
        steps=steps,
        path_length_m=path_length,
        shortest_length_m=shortest,
        termination_cause=cause,
        collision_count=collisions,
        log_lines=tuple(log),
        trajectory=tuple(trajectory),
        final_grid=grid,
    )


def _mark_bump(grid: OccupancyGrid, pose: AgentPose) -> OccupancyGrid:
    """Record a blocked forward move on the map.

    The physical hit lies somewhere along the attempted stride, which can
    span several cells; the first cell along the heading the map has not
    confirmed free takes the blame.  When the map claims the whole stride
    is free it is wrong somewhere, so the nearest non-own cell does.
    """
    heading = math.radians(pose.heading_deg)
    dx, dy = math.cos(heading), math.sin(heading)
    h = grid.resolution
    own = pose.cell(h)
    probes = max(2, int(math.ceil(scenemod.FORWARD_STEP_M / h)) + 1)
    fallback: tuple[int, int] | None = None
    for k in range(1, probes + 1):
        ix = int(math.floor((pose.x + dx * k * h) / h))
        iy = int(math.floor((pose.y + dy * k * h) / h))
        if (ix, iy) == own or not grid.in_bounds(ix, iy):
            continue
        if fallback is None:
            fallback = (ix, iy)
        if grid.cells[iy, ix] != mapping.FREE:
            fallback = (ix, iy)
            break
    if fallback is None:
        return grid
    out = grid.copy()
    out.cells[fallback[1], fallback[0]] = mapping.OBSTACLE
    return out


def _within_goal(scene: SceneMap, pose: AgentPose, goal_cells,
                 radius_m: float) -> bool:
    """Ground-truth success test: pose within ``radius_m`` (inclusive) of
    the nearest goal cell center."""
    for cell in goal_cells:
        cx, cy = scene.cell_center(cell)
        if math.hypot(cx - pose.x, cy - pose.y) <= radius_m:
            return True
    return False


def compute_sr(results) -> float:
    """Fraction of successful episodes."""
    results = list(results)
    if not results:
        raise ValueError("cannot compute SR over zero episodes")
    return sum(1 for r in results if r.success) / len(results)


def compute_spl(results) -> float:
    """Mean over episodes of S*l/max(p, l); failures contribute 0."""
    results = list(results)
    if not results:
        raise ValueError("cannot compute SPL over zero episodes")
    total = 0.0
    for r in results:
        if not r.success:
            continue
        l, p = r.shortest_length_m, r.path_length_m
        if not math.isfinite(l):
            raise ValueError(
                "degenerate successful episode: shortest length is infinite "
                "(goal region unreachable from the start; scene authoring "
                "must keep goals reachable)")
        if l <= 0.0:
            if l == 0.0 and p == 0.0:
                total += 1.0
                continue
            raise ValueError(
                f"degenerate successful episode: l={l}, p={p} "
                "(episode generation must exclude start-on-goal)")
        total += l / max(p, l)
    return total / len(results)
