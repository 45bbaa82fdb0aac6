import numpy as np
import pytest

from legplan.errors import InvalidSpec, OutOfBounds, ParseError
from legplan.terrain import (
    ElevationMap,
    ScenarioSpec,
    default_start_goal,
    generate_scenario,
    height_at,
    heights_at,
    load_map,
    roughness_at,
    roughness_field,
    save_map,
)


def test_height_bilinear_interpolation():
    heights = np.array([[0.0, 1.0], [2.0, 3.0]])
    emap = ElevationMap(width=2, height=2, resolution=1.0, origin=np.zeros(2), heights=heights)
    assert height_at(emap, (0.0, 0.0)) == 0.0
    assert height_at(emap, (1.0, 1.0)) == 3.0
    assert height_at(emap, (0.5, 0.5)) == pytest.approx(1.5)
    assert height_at(emap, (1.0, 0.0)) == 1.0


def test_out_of_bounds_query_raises(flat_map):
    with pytest.raises(OutOfBounds):
        height_at(flat_map, (-0.1, 1.0))
    with pytest.raises(OutOfBounds):
        height_at(flat_map, (1.0, flat_map.y_max + 0.01))


def test_invalid_map_specs():
    with pytest.raises(InvalidSpec):
        ElevationMap(width=1, height=2, resolution=0.1, origin=np.zeros(2), heights=np.zeros((2, 1)))
    with pytest.raises(InvalidSpec):
        ElevationMap(width=2, height=2, resolution=0.0, origin=np.zeros(2), heights=np.zeros((2, 2)))
    with pytest.raises(InvalidSpec):
        ElevationMap(
            width=2, height=2, resolution=0.1, origin=np.zeros(2),
            heights=np.array([[0.0, np.nan], [0.0, 0.0]]),
        )
    with pytest.raises(InvalidSpec):
        ScenarioSpec("volcano")
    with pytest.raises(InvalidSpec):
        ScenarioSpec("bug_trap", entrance_width=0.0)


def test_scenarios_are_deterministic():
    a = generate_scenario(ScenarioSpec("rough", seed=7))
    b = generate_scenario(ScenarioSpec("rough", seed=7))
    assert np.array_equal(a.heights, b.heights)
    c = generate_scenario(ScenarioSpec("rough", seed=8))
    assert not np.array_equal(a.heights, c.heights)


def test_flat_scenario_is_flat(flat_map):
    assert flat_map.max_height() == 0.0


def test_rough_scenario_exceeds_hexapod_height(rough_map, hex_model):
    assert rough_map.max_height() > hex_model.standing_height


def test_box_scenario_blocks_straight_line():
    emap = generate_scenario(ScenarioSpec("box"))
    start, goal = default_start_goal()
    ts = np.linspace(0.0, 1.0, 200)[:, None]
    line = start[None, :] * (1 - ts) + goal[None, :] * ts
    assert heights_at(emap, line).max() >= 0.5 - 1e-9


def test_bug_trap_traps_and_entrance_width():
    emap = generate_scenario(ScenarioSpec("bug_trap", entrance_width=1.2))
    start, goal = default_start_goal()
    ts = np.linspace(0.0, 1.0, 400)[:, None]
    line = start[None, :] * (1 - ts) + goal[None, :] * ts
    assert heights_at(emap, line).max() >= 0.5 - 1e-9

    # the opening sits in a long wall row split into two stubs; measure the
    # clear span between the innermost wall cells of such a row
    opening = None
    for iy in range(emap.height):
        high = np.where(emap.heights[iy] >= 0.5)[0]
        if high.size < 30:  # skip rows that only cross the short side walls
            continue
        gaps = np.diff(high)
        k = int(np.argmax(gaps))
        if gaps[k] > 1:
            span = gaps[k] * emap.resolution
            opening = span if opening is None else max(opening, span)
    assert opening == pytest.approx(1.2, abs=2 * emap.resolution)


def test_start_goal_distance():
    start, goal = default_start_goal()
    assert np.linalg.norm(goal - start) == pytest.approx(4.6)


def test_map_roundtrip(rough_map):
    data = save_map(rough_map)
    clone = load_map(data)
    assert clone.width == rough_map.width
    assert clone.height == rough_map.height
    assert clone.resolution == rough_map.resolution
    assert np.array_equal(clone.origin, rough_map.origin)
    assert np.array_equal(clone.heights, rough_map.heights)


def test_load_map_rejects_garbage():
    with pytest.raises(ParseError):
        load_map(b"BOGUS 9\n")
    with pytest.raises(ParseError):
        load_map(b"ELEVMAP 1\nwidth 2 height 2 resolution 0.1 origin 0 0\n1 2\n")


def test_roughness_field_matches_pointwise(rough_map, rng):
    radius = 0.06
    field = roughness_field(rough_map, radius)
    for _ in range(20):
        ix = int(rng.integers(field.margin, rough_map.width - field.margin))
        iy = int(rng.integers(field.margin, rough_map.height - field.margin))
        p = rough_map.cell_center(ix, iy)
        ref = roughness_at(rough_map, p, radius)
        assert field.slope[iy, ix] == pytest.approx(ref["slope"], abs=1e-9)
        assert field.variance[iy, ix] == pytest.approx(ref["height_variance"], abs=1e-9)
