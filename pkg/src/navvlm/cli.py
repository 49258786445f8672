"""Command line entry points: run one episode, evaluate a batch, or
generate scenes.

All file outputs are written atomically (temp file + rename) and every
command is deterministic for a fixed seed, so reruns produce byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import functools
import json
import math
import os
import sys
import tempfile

import numpy as np
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import controller, scenegen
from . import scene as scenemod
from .controller import EpisodeConfig, run_episode
from .guidance import (AlwaysExploreOracle, GeodesicOracle, RandomOracle,
                       RemoteOracle, StopAtOracle)
from .mapping import export_map
from .scene import AgentPose, EpisodeSpec, SceneMap, SceneParseError

ORACLE_SELECTORS = "geodesic | random | explore-only | stop-at:K | remote:URL"


class CliError(Exception):
    """A usage or input problem reported to stderr with exit status 2."""


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _refuse_existing(paths: list[Path], force: bool) -> None:
    if force:
        return
    clashes = [str(p) for p in paths if p.exists()]
    if clashes:
        raise CliError("refusing to overwrite existing output "
                       f"(pass --force): {', '.join(clashes)}")


def make_oracle(selector: str, scene: SceneMap, spec: EpisodeSpec, *,
                seed: int, success_radius_m: float):
    """Build the oracle named by ``selector`` (see ORACLE_SELECTORS)."""
    if selector == "geodesic":
        return GeodesicOracle(scene, spec, success_radius_m=success_radius_m)
    if selector == "random":
        return RandomOracle(seed)
    if selector == "explore-only":
        return AlwaysExploreOracle()
    if selector.startswith("stop-at:"):
        try:
            k = int(selector.partition(":")[2])
        except ValueError:
            raise CliError(f"bad stop-at step in oracle selector {selector!r}")
        if k < 0:
            raise CliError(f"stop-at step must be >= 0, got {k}")
        return StopAtOracle(k)
    if selector.startswith("remote:"):
        url = selector.partition(":")[2]
        if not url:
            raise CliError("remote oracle selector needs a URL, e.g. "
                           "remote:http://localhost:8080")
        return RemoteOracle(url)
    raise CliError(f"unknown oracle selector {selector!r} "
                   f"(expected {ORACLE_SELECTORS})")


def _episode_seed(base_seed: int, index: int) -> int:
    """Stable per-episode seed, independent of worker scheduling."""
    return (base_seed * 2_654_435_761 + index) % 2**32


# ---------------------------------------------------------------------------
# episode manifests
# ---------------------------------------------------------------------------

def _check(cond: bool, index: int, message: str) -> None:
    if not cond:
        raise CliError(f"episodes entry {index}: {message}")


def load_episodes(path: str | Path) -> list[tuple[Path, EpisodeSpec]]:
    """Parse an episodes.json manifest into (scene path, episode) pairs.

    Every entry is validated up front -- scene file parseable, goal label
    declared, start pose inside free space -- so a malformed manifest
    aborts before any episode runs.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise CliError(f"episodes file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"episodes file {path} is not valid JSON: {exc}")
    if not isinstance(payload, dict) or not isinstance(payload.get("episodes"), list):
        raise CliError(f"episodes file {path} must be an object with an "
                       "'episodes' list")

    out: list[tuple[Path, EpisodeSpec]] = []
    scenes: dict[Path, SceneMap] = {}
    for i, entry in enumerate(payload["episodes"]):
        _check(isinstance(entry, dict), i, "must be an object")
        for key, kind in (("scene", str), ("start", dict), ("goal_label", str),
                          ("goal_text", str), ("seed", int)):
            _check(isinstance(entry.get(key), kind), i,
                   f"missing or mistyped field {key!r}")
        start = entry["start"]
        for key in ("x", "y", "heading_deg"):
            _check(isinstance(start.get(key), (int, float))
                   and math.isfinite(start[key]), i,
                   f"start.{key} must be a finite number")

        scene_path = (path.parent / entry["scene"]).resolve()
        if scene_path not in scenes:
            try:
                scenes[scene_path] = scenemod.load_scene(scene_path)
            except FileNotFoundError:
                raise CliError(f"episodes entry {i}: scene file not found: "
                               f"{scene_path}")
            except SceneParseError as exc:
                raise CliError(f"episodes entry {i}: scene {scene_path} "
                               f"failed to parse: {exc}")
        scene = scenes[scene_path]
        _check(entry["goal_label"] in scene.goal_regions, i,
               f"goal label {entry['goal_label']!r} not declared by scene "
               f"{scene.scene_id!r}")
        pose = AgentPose(float(start["x"]), float(start["y"]),
                         float(start["heading_deg"]))
        _check(scene.is_free_point(pose.x, pose.y), i,
               f"start pose ({pose.x}, {pose.y}) is not in free space")
        out.append((scene_path, EpisodeSpec(
            scene_id=scene.scene_id, start=pose,
            goal_label=entry["goal_label"], goal_text=entry["goal_text"],
            seed=int(entry["seed"]))))
    if not out:
        raise CliError(f"episodes file {path} lists no episodes")
    return out


def _config_from_args(args: argparse.Namespace) -> EpisodeConfig:
    return EpisodeConfig(max_steps=args.max_steps,
                         success_radius_m=args.success_radius,
                         oracle_cadence=args.cadence)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _default_episode(scene: SceneMap, seed: int) -> EpisodeSpec:
    """Fallback episode for `run --scene` without a manifest: first free
    traversable cell (row-major), heading 0, first goal label."""
    if not scene.goal_regions:
        raise CliError(f"scene {scene.scene_id!r} declares no goal regions")
    label = sorted(scene.goal_regions)[0]
    from .mapping import (FREE, OBSTACLE, OccupancyGrid,  # keep CLI light
                          dilate_obstacles)
    cells = np.where(scene.obstacles, OBSTACLE, FREE).astype(np.uint8)
    grid = OccupancyGrid(resolution=scene.resolution, cells=cells)
    mask = dilate_obstacles(grid)
    free = [(iy, ix) for iy in range(scene.height) for ix in range(scene.width)
            if mask[iy, ix]]
    if not free:
        raise CliError(f"scene {scene.scene_id!r} has no traversable cell")
    iy, ix = free[0]
    x, y = scene.cell_center((ix, iy))
    return EpisodeSpec(scene_id=scene.scene_id,
                       start=AgentPose(x, y, 0.0),
                       goal_label=label, goal_text=f"the {label}", seed=seed)


def cmd_run(args: argparse.Namespace) -> int:
    scene = None
    if args.scene:
        try:
            scene = scenemod.load_scene(args.scene)
        except FileNotFoundError:
            raise CliError(f"scene file not found: {args.scene}")
        except SceneParseError as exc:
            raise CliError(f"scene {args.scene} failed to parse: {exc}")

    if args.episodes:
        episodes = load_episodes(args.episodes)
        if scene is not None:
            matches = [(p, e) for p, e in episodes
                       if e.scene_id == scene.scene_id]
            if not matches:
                raise CliError(f"episodes file has no entry for scene "
                               f"{scene.scene_id!r}")
            scene_path, spec = matches[0]
        else:
            scene_path, spec = episodes[0]
            scene = scenemod.load_scene(scene_path)
    elif scene is not None:
        spec = _default_episode(scene, args.seed)
    else:
        raise CliError("run needs --scene and/or --episodes")

    config = _config_from_args(args)
    oracle = make_oracle(args.oracle, scene, spec, seed=args.seed,
                         success_radius_m=config.success_radius_m)
    result = run_episode(scene, spec, oracle, config)

    out = Path(args.out)
    steps_path = out / "steps.jsonl"
    pgm_path = out / "map.pgm"
    sidecar_path = out / "map.txt"
    _refuse_existing([steps_path, pgm_path, sidecar_path], args.force)
    _atomic_write(steps_path, result.to_jsonl())
    if result.final_grid is not None:
        out.mkdir(parents=True, exist_ok=True)
        export_map(result.final_grid, pgm_path, sidecar_path,
                   list(result.trajectory))

    l = result.shortest_length_m
    print(f"scene {scene.scene_id} goal {spec.goal_text!r} oracle {args.oracle}")
    print(f"  success            {str(result.success).lower()}")
    print(f"  steps              {result.steps}")
    print(f"  termination_cause  {result.termination_cause.value}")
    print(f"  path_length        {result.path_length_m:.3f} m")
    print(f"  shortest_length    {'unreachable' if not math.isfinite(l) else f'{l:.3f} m'}")
    print(f"  spl                {result.spl_term:.3f}")
    print(f"  collisions         {result.collision_count}")
    print(f"  wrote              {steps_path}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _load_scene_cached(path: str) -> SceneMap:
    return scenemod.load_scene(path)


def _eval_one(task: tuple) -> dict:
    """Run one episode in a worker process; returns a JSON-ready record."""
    (index, scene_path, spec_fields, selector, base_seed,
     config_fields) = task
    scene = _load_scene_cached(scene_path)
    spec = EpisodeSpec(scene_id=spec_fields["scene_id"],
                       start=AgentPose(*spec_fields["start"]),
                       goal_label=spec_fields["goal_label"],
                       goal_text=spec_fields["goal_text"],
                       seed=spec_fields["seed"])
    config = EpisodeConfig(**config_fields)
    oracle = make_oracle(selector, scene, spec,
                         seed=_episode_seed(base_seed, index),
                         success_radius_m=config.success_radius_m)
    result = run_episode(scene, spec, oracle, config)
    l = result.shortest_length_m
    return {
        "index": index,
        "scene": scene.scene_id,
        "success": result.success,
        "steps": result.steps,
        "path_length": result.path_length_m,
        "shortest_length": l if math.isfinite(l) else None,
        "spl": result.spl_term,
        "termination_cause": result.termination_cause.value,
        "collision_count": result.collision_count,
    }


def aggregate_records(records: list[dict]) -> dict:
    """SR/SPL/n over per-episode records; the exact arithmetic readers of
    the results JSONL should use to re-derive the reported metrics."""
    if not records:
        raise ValueError("cannot aggregate zero episodes")
    n = len(records)
    return {"sr": sum(1 for r in records if r["success"]) / n,
            "spl": sum(r["spl"] for r in records) / n,
            "n": n}


def _run_batch(episodes, selector: str, args: argparse.Namespace,
               config: EpisodeConfig) -> list[dict]:
    config_fields = {"max_steps": config.max_steps,
                     "success_radius_m": config.success_radius_m,
                     "oracle_cadence": config.oracle_cadence}
    tasks = []
    for index, (scene_path, spec) in enumerate(episodes):
        spec_fields = {"scene_id": spec.scene_id,
                       "start": (spec.start.x, spec.start.y,
                                 spec.start.heading_deg),
                       "goal_label": spec.goal_label,
                       "goal_text": spec.goal_text, "seed": spec.seed}
        tasks.append((index, str(scene_path), spec_fields, selector,
                      args.seed, config_fields))

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            records = list(pool.map(_eval_one, tasks))
    else:
        records = [_eval_one(t) for t in tasks]
    records.sort(key=lambda r: r["index"])
    return records


def cmd_eval(args: argparse.Namespace) -> int:
    episodes = load_episodes(args.episodes)
    config = _config_from_args(args)

    out = Path(args.out)
    results_path = out / "results.jsonl"
    metrics_path = out / "metrics.json"
    baseline_path = out / "results_baseline.jsonl"
    existing = [results_path, metrics_path]
    if args.baseline:
        existing.append(baseline_path)
    _refuse_existing(existing, args.force)

    records = _run_batch(episodes, args.oracle, args, config)
    metrics = aggregate_records(records)
    _atomic_write(results_path,
                  "".join(json.dumps(r) + "\n" for r in records))

    if args.baseline:
        baseline_records = _run_batch(episodes, args.baseline, args, config)
        metrics["baseline"] = aggregate_records(baseline_records)
        _atomic_write(baseline_path,
                      "".join(json.dumps(r) + "\n" for r in baseline_records))

    _atomic_write(metrics_path, json.dumps(metrics, indent=2) + "\n")

    print(f"evaluated {metrics['n']} episodes with oracle {args.oracle}")
    print(f"  sr   {metrics['sr']:.4f}")
    print(f"  spl  {metrics['spl']:.4f}")
    if args.baseline:
        base = metrics["baseline"]
        print(f"baseline {args.baseline}")
        print(f"  sr   {base['sr']:.4f}")
        print(f"  spl  {base['spl']:.4f}")
    print(f"  wrote {metrics_path}")
    return 0


# ---------------------------------------------------------------------------
# gen-scenes
# ---------------------------------------------------------------------------

def cmd_gen_scenes(args: argparse.Namespace) -> int:
    if not 0.0 <= args.density <= 0.4:
        raise CliError(f"--density must be within [0, 0.4], got {args.density}")
    if args.size < 8:
        raise CliError(f"--size must be at least 8, got {args.size}")
    if args.count < 1:
        raise CliError(f"--count must be at least 1, got {args.count}")

    out = Path(args.out)
    manifest_path = out / "episodes.json"
    scene_paths = [out / f"scene_{i:03d}.txt" for i in range(args.count)]
    _refuse_existing([manifest_path, *scene_paths], args.force)

    try:
        batch = scenegen.generate_batch(args.count, seed=args.seed,
                                        size=args.size, density=args.density)
    except scenegen.SceneGenerationError as exc:
        raise CliError(str(exc))

    entries = []
    for generated, scene_path in zip(batch, scene_paths):
        _atomic_write(scene_path, generated.text)
        e = generated.episode
        entries.append({
            "scene": scene_path.name,
            "start": {"x": e.start.x, "y": e.start.y,
                      "heading_deg": e.start.heading_deg},
            "goal_label": e.goal_label,
            "goal_text": e.goal_text,
            "seed": e.seed,
        })
    manifest = {"resolution": scenegen.DEFAULT_RESOLUTION_M,
                "episodes": entries}
    _atomic_write(manifest_path, json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {args.count} scenes and {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navvlm",
        description="Language-guided navigation episodes on 2-D scene maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_episode_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--oracle", default="geodesic",
                       help=f"oracle selector: {ORACLE_SELECTORS}")
        p.add_argument("--max-steps", type=int, default=500)
        p.add_argument("--success-radius", type=float, default=1.0)
        p.add_argument("--cadence", type=int, default=1,
                       help="query the oracle every N steps")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")

    p_run = sub.add_parser("run", help="run a single episode")
    p_run.add_argument("--scene", help="scene map file")
    p_run.add_argument("--episodes", help="episodes.json manifest")
    add_episode_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate a batch of episodes")
    p_eval.add_argument("--episodes", required=True,
                        help="episodes.json manifest")
    p_eval.add_argument("--baseline",
                        help="second oracle selector to compare against")
    p_eval.add_argument("--workers", type=int, default=1)
    add_episode_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_gen = sub.add_parser("gen-scenes", help="generate random scenes")
    p_gen.add_argument("--count", type=int, default=50)
    p_gen.add_argument("--size", type=int, default=64,
                       help="grid side length in cells")
    p_gen.add_argument("--density", type=float, default=0.25,
                       help="target obstacle fraction, within [0, 0.4]")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
    p_gen.set_defaults(func=cmd_gen_scenes)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
