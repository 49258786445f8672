"""Scene text format, ray casting, kinematics, and ground-truth geodesics."""

import math

import numpy as np
import pytest

from navvlm.scene import (
    FORWARD_STEP_M,
    TURN_DEG,
    AgentPose,
    SceneParseError,
    dump_scene,
    geodesic_distance,
    geodesic_field,
    line_of_sight,
    load_scene,
    parse_scene,
    ray_bearings_deg,
    raycast_depth,
    step,
    visible_goal_labels,
)

BOX_ROOM = """resolution 0.1
goals box=G
######
#....#
#.G..#
#....#
######
"""


def test_parse_scene_basics():
    scene = parse_scene(BOX_ROOM, scene_id="room")
    assert scene.resolution == 0.1
    assert scene.height == 5 and scene.width == 6
    assert scene.obstacles[0].all() and scene.obstacles[-1].all()
    assert not scene.obstacles[2, 2]          # goal glyph is free space
    assert scene.goal_regions == {"box": frozenset({(2, 2)})}


def test_parse_scene_errors_carry_line_and_column():
    with pytest.raises(SceneParseError, match="line 4"):
        parse_scene("resolution 0.1\ngoals box=G\n###\n#?#\n###\n", scene_id="x")
    with pytest.raises(SceneParseError, match="resolution"):
        parse_scene("resolution nope\ngoals box=G\n#\n", scene_id="x")
    with pytest.raises(SceneParseError, match="ragged"):
        parse_scene("resolution 0.1\ngoals box=G\n###\n##\n", scene_id="x")
    with pytest.raises(SceneParseError):
        parse_scene("resolution 0.1\ngoals box=#\n###\n", scene_id="x")
    with pytest.raises(SceneParseError):  # same glyph bound twice
        parse_scene("resolution 0.1\ngoals box=G, cup=G\n#G#\n", scene_id="x")


def test_dump_scene_round_trips():
    scene = parse_scene(BOX_ROOM, scene_id="room")
    text = dump_scene(scene)
    again = parse_scene(text, scene_id="room")
    assert np.array_equal(again.obstacles, scene.obstacles)
    assert again.goal_regions == scene.goal_regions
    assert again.resolution == scene.resolution


def test_ray_bearings_leftmost_first():
    bearings = ray_bearings_deg(n_rays=5, fov_deg=90.0)
    assert bearings[0] == 45.0
    assert bearings[-1] == -45.0
    assert list(bearings) == sorted(bearings, reverse=True)


def test_raycast_depth_straight_and_diagonal():
    # 1 m x 1 m room with 0.1 m walls; agent in the middle facing +x
    grid = "\n".join(["#" * 12] + ["#" + "." * 10 + "#"] * 10 + ["#" * 12])
    text = "resolution 0.1\ngoals box=G\n" + grid.replace(".", "G", 1) + "\n"
    scene = parse_scene(text, scene_id="room")
    pose = AgentPose(x=0.6, y=0.6, heading_deg=0.0)
    scan = raycast_depth(scene, pose, n_rays=3, fov_deg=90.0, max_range=5.0)
    # middle ray: wall inner face at x = 1.1, so 0.5 m
    assert scan.ranges[1] == pytest.approx(0.5, abs=1e-9)
    assert scan.hits[1]
    # 45-degree rays: sqrt(2) * 0.5 to the corner walls
    assert scan.ranges[0] == pytest.approx(0.5 * math.sqrt(2), abs=1e-9)
    assert scan.ranges[2] == pytest.approx(0.5 * math.sqrt(2), abs=1e-9)


def test_raycast_depth_clamps_to_max_range():
    text = "resolution 0.1\ngoals box=G\n" + "\n".join(
        ["#" * 40] + ["#" + "G" + "." * 37 + "#"] + ["#" * 40]) + "\n"
    scene = parse_scene(text, scene_id="hall")
    pose = AgentPose(x=0.15, y=0.15, heading_deg=0.0)
    scan = raycast_depth(scene, pose, n_rays=1, fov_deg=0.0, max_range=1.0)
    assert scan.ranges[0] == 1.0
    assert not scan.hits[0]


def test_step_turns_and_wraps():
    from navvlm.planner import Action
    pose = AgentPose(x=1.0, y=1.0, heading_deg=350.0)
    scene = parse_scene(BOX_ROOM.replace("0.1", "1.0"), scene_id="big")
    left, hit = step(scene, pose, Action.TURN_LEFT)
    assert (left.heading_deg, hit) == ((350.0 + TURN_DEG) % 360.0, False)
    assert left.x == pose.x and left.y == pose.y


def test_step_forward_and_collision():
    from navvlm.planner import Action
    scene = parse_scene(BOX_ROOM.replace("0.1", "1.0"), scene_id="big")
    pose = AgentPose(x=1.5, y=1.5, heading_deg=0.0)
    moved, hit = step(scene, pose, Action.FORWARD)
    assert not hit
    assert moved.x == pytest.approx(1.5 + FORWARD_STEP_M)
    assert moved.y == 1.5
    # walk into the east wall: blocked step leaves the pose unchanged
    at_wall = AgentPose(x=4.9, y=1.5, heading_deg=0.0)
    stuck, hit = step(scene, at_wall, Action.FORWARD)
    assert hit
    assert (stuck.x, stuck.y) == (at_wall.x, at_wall.y)


def test_step_stop_is_noop():
    from navvlm.planner import Action
    scene = parse_scene(BOX_ROOM, scene_id="room")
    pose = AgentPose(x=0.35, y=0.25, heading_deg=123.0)
    same, hit = step(scene, pose, Action.STOP)
    assert same == pose and not hit


def test_geodesic_field_and_distance():
    corridor = ("resolution 0.05\ngoals box=G\n"
                + "#" * 20 + "\n#" + "." * 17 + "G#\n" + "#" * 20 + "\n")
    scene = parse_scene(corridor, scene_id="c")
    goal = scene.goal_regions["box"]
    field = geodesic_field(scene, goal)
    assert field[1, 18] == 0.0
    assert field[1, 1] == pytest.approx(17 * 0.05)
    pose = AgentPose(x=0.075, y=0.075, heading_deg=0.0)
    assert geodesic_distance(scene, pose, goal) == pytest.approx(17 * 0.05)
    assert geodesic_distance(scene, (1, 1), goal) == pytest.approx(17 * 0.05)


def test_geodesic_distance_unreachable_is_inf():
    sealed = ("resolution 0.05\ngoals box=G\n"
              "#######\n#..#.G#\n#######\n")
    scene = parse_scene(sealed, scene_id="s")
    assert geodesic_distance(scene, (1, 1), scene.goal_regions["box"]) == math.inf


def test_line_of_sight_blocked_by_wall():
    scene = parse_scene(BOX_ROOM, scene_id="room")
    assert line_of_sight(scene, 0.15, 0.25, 0.45, 0.25)
    walled = parse_scene("resolution 0.1\ngoals box=G\n"
                         "######\n#.#..#\n#.#G.#\n#.#..#\n######\n",
                         scene_id="walled")
    assert not line_of_sight(walled, 0.15, 0.25, 0.45, 0.25)


def test_visible_goal_labels_respects_range_and_walls():
    scene = parse_scene(BOX_ROOM, scene_id="room")
    pose = AgentPose(x=0.15, y=0.25, heading_deg=0.0)
    assert visible_goal_labels(scene, pose) == ["box"]
    assert visible_goal_labels(scene, pose, max_range=0.05) == []


def test_load_scene_uses_stem_as_scene_id(tmp_path):
    path = tmp_path / "my_room.txt"
    path.write_text(BOX_ROOM)
    scene = load_scene(path)
    assert scene.scene_id == "my_room"


def test_pose_cell_uses_floor():
    pose = AgentPose(x=0.149, y=0.26, heading_deg=0.0)
    assert pose.cell(0.05) == (2, 5)
    assert AgentPose(x=0.0, y=0.0, heading_deg=0.0).cell(0.05) == (0, 0)
