"""Release gate: every shipped guarantee, one test per guarantee.

Run with -v for one pass/fail line each.  Two strict-xfail tests record
accuracy levels that a first-order 4-neighbor upwind solver provably cannot
reach (the closed-form bound is in their docstrings); strict mode turns
them into hard failures the day the solver improves, so the recorded
limits stay honest.
"""

import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from grid_reference import dijkstra8, euclidean_field, random_mask
from navvlm.cli import load_episodes, main
from navvlm.controller import EpisodeConfig, compute_spl, compute_sr, run_episode
from navvlm.guidance import (
    Guidance,
    Oracle,
    OracleReply,
    OracleRequest,
    PromptKind,
    RandomOracle,
    RemoteOracle,
    SceneSnapshot,
    TerminateVerdict,
    parse_oracle_reply,
    parse_termination_reply,
    query_direction,
    query_termination,
)
from navvlm.planner import fmm_solve
from navvlm.scene import load_scene
from wire_stub import GOLDEN, start_stub, stop_stub, stub_url

FIXTURES = Path(__file__).parent / "fixtures"

ADVERSARIAL_REPLIES = [
    "", " ", "\n\t", "null", "{}", "[]", "42", "a" * 4096, "\x00\x01\x7f",
    "go LEFT no wait RIGHT", "anywhere but here", "I cannot help with that",
    "<direction>north</direction>", "π ≈ 3.14159", "¯\\_(ツ)_/¯",
    "turn turn turn", "stop stop stop", "yes!!!", "reached... not",
    "LeFtRiGhT", "forward; DROP TABLE goals;--", "явно налево",
]


# ---------------------------------------------------------------------------
# travel-time solver accuracy
# ---------------------------------------------------------------------------

def open_grid_errors(size=128, h=1.0):
    """Solve an empty grid from its center; return (solve seconds, T, E)."""
    mask = np.ones((size, size), dtype=bool)
    source = (size // 2, size // 2)
    t0 = time.perf_counter()
    field = fmm_solve(mask, {source}, h)
    elapsed = time.perf_counter() - t0
    exact = euclidean_field((size, size), source, h)
    return elapsed, field.t, exact


def test_travel_time_on_open_grid_is_accurate_and_fast():
    """Empty 128x128 grid, center source: straight-line rows and columns are
    exact, the far field is within 10%, the global error is first-order
    bounded, and the solve finishes well under a second."""
    elapsed, t, exact = open_grid_errors()
    assert elapsed < 1.0

    # 1-D corridors are exact: integers bitwise, fractional h to last ulps
    one_d = fmm_solve(np.ones((1, 64), dtype=bool), {(0, 0)}, 1.0)
    assert np.array_equal(one_d.t[0], np.arange(64, dtype=float))
    fine = fmm_solve(np.ones((1, 64), dtype=bool), {(0, 0)}, 0.05)
    assert np.max(np.abs(fine.t[0] - 0.05 * np.arange(64))) <= 1e-12

    rel = np.zeros_like(t)
    off = exact > 0
    rel[off] = np.abs(t[off] - exact[off]) / exact[off]

    # worst cell overall is the source's diagonal neighbor at (2+sqrt(2))/2
    assert rel.max() == pytest.approx((2 + math.sqrt(2)) / (2 * math.sqrt(2)) - 1,
                                      abs=1e-12)
    # beyond ten cell widths the error is under 10%
    far = exact >= 10.0
    assert rel[far].max() <= 0.10
    assert rel[far].max() == pytest.approx(0.069674, abs=1e-5)
    # everywhere: within 10% plus half a cell width of first-order slack
    residual = np.abs(t - exact) - 0.10 * exact
    assert residual.max() <= 0.5
    assert residual.max() == pytest.approx(0.151472, abs=1e-5)


@pytest.mark.xfail(strict=True, reason=(
    "first-order 4-neighbor upwind update: the source's diagonal neighbor "
    "solves T=(Tx+Ty+sqrt(2h^2-(Tx-Ty)^2))/2 with Tx=Ty=h, giving "
    "(2+sqrt(2))/2*h ~ 1.7071h against the true sqrt(2)h ~ 1.4142h, a 20.7% "
    "relative error; a 10% everywhere bound needs a wider stencil or "
    "higher-order scheme"))
def test_travel_time_open_grid_within_ten_percent_at_every_cell():
    """Aspirational bound kept as a strict xfail: max relative error <= 10%
    at every cell of the open grid, including the cells touching the
    source where the stencil's geometry error peaks."""
    _, t, exact = open_grid_errors()
    off = exact > 0
    rel = np.abs(t[off] - exact[off]) / exact[off]
    assert rel.max() <= 0.10


@pytest.fixture(scope="module")
def mask_sweep():
    """Thirty seeded random 64x64 masks (20% blocked): solver field vs. an
    independent 8-connected Dijkstra with chord edge costs, h = 1."""
    t0 = time.perf_counter()
    pairs = []
    for seed in range(30):
        mask = random_mask(seed, 64, 0.2)
        ys, xs = np.nonzero(mask)
        d2 = (xs - 32) ** 2 + (ys - 32) ** 2
        k = np.lexsort((xs, ys, d2))[0]
        source = (int(xs[k]), int(ys[k]))
        t = fmm_solve(mask, {source}, 1.0).t
        d = dijkstra8(mask, {source}, 1.0)
        pairs.append((t, d))
    return pairs, time.perf_counter() - t0


def test_travel_time_agrees_with_dijkstra_oracle_on_random_masks(mask_sweep):
    """On 30 random masks the solver reaches exactly the cells Dijkstra
    reaches, and agrees within 8% plus one cell width of slack."""
    pairs, elapsed = mask_sweep
    assert elapsed < 30.0
    worst_residual = 0.0
    for t, d in pairs:
        assert np.array_equal(np.isfinite(t), np.isfinite(d))
        reached = np.isfinite(d) & (d > 0)
        residual = np.abs(t[reached] - d[reached]) - 0.08 * d[reached]
        worst_residual = max(worst_residual, float(residual.max()))
    assert worst_residual <= 1.0
    assert worst_residual == pytest.approx(0.591353, abs=1e-5)


@pytest.mark.xfail(strict=True, reason=(
    "same first-order stencil limit as the open grid: cells diagonal to the "
    "source carry a 20.7% relative error, and chains of diagonal moves keep "
    "the far field above 8% (measured worst 11.2% beyond ten cell widths)"))
def test_travel_time_within_eight_percent_of_dijkstra_at_every_cell(mask_sweep):
    """Aspirational bound kept as a strict xfail: relative disagreement with
    the Dijkstra oracle <= 8% at every reachable cell of every mask."""
    pairs, _ = mask_sweep
    worst = 0.0
    for t, d in pairs:
        reached = np.isfinite(d) & (d > 0)
        rel = np.abs(t[reached] - d[reached]) / d[reached]
        worst = max(worst, float(rel.max()))
    assert worst <= 0.08


# ---------------------------------------------------------------------------
# batch navigation quality
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def batch50(tmp_path_factory):
    """Fifty generated scenes (seed 1, 64x64, 25% obstacles) evaluated with
    the geodesic oracle against the explore-only baseline."""
    root = tmp_path_factory.mktemp("batch50")
    scenes = root / "scenes"
    t0 = time.perf_counter()
    assert main(["gen-scenes", "--count", "50", "--size", "64",
                 "--density", "0.25", "--seed", "1", "--out", str(scenes)]) == 0
    assert main(["eval", "--episodes", str(scenes / "episodes.json"),
                 "--oracle", "geodesic", "--baseline", "explore-only",
                 "--out", str(root / "ev")]) == 0
    elapsed = time.perf_counter() - t0
    metrics = json.loads((root / "ev" / "metrics.json").read_text())
    return {"scenes": scenes, "metrics": metrics, "elapsed": elapsed}


def test_perfect_guidance_batch_reaches_every_goal(batch50):
    """With ground-truth guidance, all 50 generated episodes succeed with
    near-geodesic paths (mean SPL >= 0.60) in well under five minutes."""
    metrics = batch50["metrics"]
    assert metrics["n"] == 50
    assert metrics["sr"] == 1.0
    assert metrics["spl"] >= 0.60
    assert metrics["spl"] == pytest.approx(0.9974, abs=5e-4)
    assert batch50["elapsed"] < 300.0


def test_guided_runs_outscore_exploration_baseline(batch50):
    """Directional guidance must strictly beat blind frontier exploration
    on mean SPL, while the baseline still finds most goals eventually."""
    metrics, base = batch50["metrics"], batch50["metrics"]["baseline"]
    assert metrics["spl"] > base["spl"]            # ties fail
    assert base["sr"] >= 0.8
    assert base["sr"] == pytest.approx(0.96, abs=5e-4)
    assert base["spl"] == pytest.approx(0.3803, abs=5e-4)


# ---------------------------------------------------------------------------
# robustness under adversarial guidance
# ---------------------------------------------------------------------------

class GarbageReplyOracle(Oracle):
    """Answers every query with seeded junk text; whatever meaning the
    episode extracts comes entirely from the reply parser."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def _blob(self) -> str:
        r = self._rng
        if r.random() < 0.5:
            return r.choice(ADVERSARIAL_REPLIES)
        return "".join(chr(r.randrange(32, 0x3000))
                       for _ in range(r.randrange(0, 60)))

    def direction(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text=self._blob())

    def termination(self, request: OracleRequest) -> OracleReply:
        return OracleReply(raw_text=self._blob())


def test_adversarial_guidance_fuzz_holds_invariants(batch50):
    """200 episodes driven by random and garbage-reply oracles: the parser
    stays total, every pose stays in free space, collisions never move the
    agent, every episode ends within budget, and batch SPL <= SR."""
    rng = random.Random(99)
    for text in ADVERSARIAL_REPLIES + [
            "".join(chr(rng.randrange(1, 0x10000))
                    for _ in range(rng.randrange(0, 200)))
            for _ in range(2000)]:
        assert parse_oracle_reply(text) in Guidance
        assert parse_termination_reply(text) in TerminateVerdict

    episodes = load_episodes(batch50["scenes"] / "episodes.json")
    scenes = {}
    config = EpisodeConfig()
    results = []
    t0 = time.perf_counter()
    for i in range(200):
        path, spec = episodes[i % len(episodes)]
        scene = scenes.setdefault(path, load_scene(path))
        oracle = RandomOracle(i) if i < 100 else GarbageReplyOracle(i)
        result = run_episode(scene, spec, oracle, config)
        assert result.steps <= 500
        prev = None
        for line in result.log_lines:
            rec = json.loads(line)
            assert scene.is_free_point(rec["x"], rec["y"])
            if rec["collision"]:
                assert (rec["x"], rec["y"]) == (prev["x"], prev["y"])
            prev = rec
        results.append(result)
    sr, spl = compute_sr(results), compute_spl(results)
    assert 0.0 <= spl <= sr <= 1.0
    assert time.perf_counter() - t0 < 300.0


# ---------------------------------------------------------------------------
# metric arithmetic
# ---------------------------------------------------------------------------

def test_metric_arithmetic_matches_hand_values():
    """SR counts successes; SPL is the mean of l/max(p, l) over successes
    with failures contributing zero."""
    from navvlm.controller import EpisodeResult, TerminationCause

    def result(success, p, l):
        return EpisodeResult(success=success, steps=1, path_length_m=p,
                             shortest_length_m=l,
                             termination_cause=TerminationCause.VLM_STOP,
                             collision_count=0)

    assert compute_spl([result(True, 2.0, 2.0)]) == 1.0
    assert compute_spl([result(True, 4.0, 2.0)]) == 0.5
    assert compute_spl([result(False, 4.0, 2.0)]) == 0.0
    mixed = [result(True, 2.0, 2.0), result(True, 4.0, 2.0),
             result(False, 1.0, 1.0), result(True, 8.0, 2.0)]
    assert compute_spl(mixed) == (1.0 + 0.5 + 0.0 + 0.25) / 4
    assert compute_sr(mixed) == 0.75
    assert compute_sr([result(False, 1.0, 1.0)]) == 0.0
    assert compute_sr([result(True, 1.0, 1.0)] * 3) == 1.0


# ---------------------------------------------------------------------------
# artifact determinism
# ---------------------------------------------------------------------------

def test_identical_runs_write_identical_logs(tmp_path):
    """The same manifest run twice produces byte-identical step logs and
    exported maps."""
    manifest = str(FIXTURES / "corridor_episodes.json")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--episodes", manifest, "--out", str(a)]) == 0
    assert main(["run", "--episodes", manifest, "--out", str(b)]) == 0
    for name in ("steps.jsonl", "map.pgm", "map.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


# ---------------------------------------------------------------------------
# wire-protocol conformance
# ---------------------------------------------------------------------------

def test_wire_client_handles_golden_and_failure_modes():
    """The HTTP client reproduces the golden request bodies byte-for-byte,
    decodes the golden responses, and degrades to NoInfo / Continue on
    timeouts and non-200 answers."""
    direction = OracleRequest(
        prompt_kind=PromptKind.DIRECTION_QUERY, goal="the red box", step=3,
        snapshot=SceneSnapshot(ranges=(1.5, 2.0, 5.0), fov_deg=90.0,
                               visible_labels=("box",)))
    termination = OracleRequest(
        prompt_kind=PromptKind.TERMINATION_CHECK, goal="the red box", step=9,
        snapshot=SceneSnapshot(ranges=(0.8,), fov_deg=90.0,
                               visible_labels=("box",)))
    server = start_stub()
    try:
        oracle = RemoteOracle(stub_url(server))
        reply = oracle.direction(direction)
        assert reply.raw_text == "You should go left toward the doorway."
        assert reply.guidance is Guidance.LEFT
        assert oracle.termination(termination).verdict is TerminateVerdict.STOP
        assert [p for p, _ in server.requests] == \
            ["/v1/direction", "/v1/termination"]
        assert server.requests[0][1] == json.loads(
            (GOLDEN / "direction_request.json").read_text())
        assert server.requests[1][1] == json.loads(
            (GOLDEN / "termination_request.json").read_text())

        server.behavior = "error"
        assert query_direction(oracle, direction) is Guidance.NOINFO
        assert query_termination(oracle, termination) is TerminateVerdict.CONTINUE

        server.behavior = "slow"
        impatient = RemoteOracle(stub_url(server), timeout_s=0.05)
        t0 = time.monotonic()
        assert query_direction(impatient, direction) is Guidance.NOINFO
        assert query_termination(impatient, termination) is \
            TerminateVerdict.CONTINUE
        assert time.monotonic() - t0 < 0.45
    finally:
        stop_stub(server)
