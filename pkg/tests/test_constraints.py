import math

import numpy as np
import pytest

from legplan.constraints import (
    CheckCounter,
    check_segment,
    check_state,
    interpolate_states,
    stability_margin,
    support_polygon,
)
from legplan.errors import NoStanceLegs, OutOfBounds
from legplan.geometry import signed_distance_to_polygon
from legplan.local_planner import nominal_state
from legplan.robot import leg_ik_all, make_state


@pytest.fixture(scope="module")
def hex_state(hex_model, flat_map):
    return nominal_state(hex_model, flat_map, (1.0, 3.0))


def test_support_polygon_requires_stance(hex_model, hex_state):
    lifted = make_state(
        hex_model,
        hex_state.body_pos,
        hex_state.body_quat,
        hex_state.joint_angles,
        np.zeros(hex_model.leg_count, dtype=bool),
    )
    with pytest.raises(NoStanceLegs):
        support_polygon(lifted)


def test_support_polygon_contains_com(hex_state):
    hull = support_polygon(hex_state)
    assert len(hull) >= 3
    assert all(v.shape == (2,) for v in hull)
    margin = signed_distance_to_polygon(hex_state.body_pos[:2], hull)
    assert margin == pytest.approx(stability_margin(hex_state))
    assert margin > 0.0


def test_degenerate_support_is_unstable(hex_model, hex_state):
    stance = np.zeros(hex_model.leg_count, dtype=bool)
    stance[:2] = True
    two_legged = make_state(
        hex_model,
        hex_state.body_pos,
        hex_state.body_quat,
        hex_state.joint_angles,
        stance,
    )
    assert stability_margin(two_legged) <= 0.0


def test_check_state_valid_nominal(hex_model, flat_map, hex_state):
    report = check_state(hex_model, flat_map, hex_state)
    assert report.valid
    assert report.in_workspace and report.collision_free and report.stable
    assert report.stability_margin > 0.0
    assert report.kinematic_margin > 0.0


def test_check_state_counts(hex_model, flat_map, hex_state):
    counter = CheckCounter()
    check_state(hex_model, flat_map, hex_state, counter=counter)
    check_state(hex_model, flat_map, hex_state, counter=counter)
    assert counter.n == 2


def test_check_state_out_of_bounds(hex_model, flat_map, hex_state):
    bad = make_state(
        hex_model,
        hex_state.body_pos + np.array([-2.0, 0.0, 0.0]),
        hex_state.body_quat,
        hex_state.joint_angles,
        hex_state.stance,
    )
    with pytest.raises(OutOfBounds):
        check_state(hex_model, flat_map, bad)


def test_check_state_detects_penetration(hex_model, flat_map, hex_state):
    sunk = make_state(
        hex_model,
        hex_state.body_pos - np.array([0.0, 0.0, 0.3]),
        hex_state.body_quat,
        hex_state.joint_angles,
        hex_state.stance,
    )
    report = check_state(hex_model, flat_map, sunk)
    assert not report.collision_free
    assert not report.valid


def test_check_state_flags_joint_limits(hex_model, flat_map, hex_state):
    angles = hex_state.joint_angles.copy()
    angles[0, 1] = hex_model.joint_limits[1, 1] + 0.5
    bent = make_state(
        hex_model,
        hex_state.body_pos,
        hex_state.body_quat,
        angles,
        hex_state.stance,
    )
    report = check_state(hex_model, flat_map, bent)
    assert not report.in_workspace


def _shifted_same_feet(model, state, dxy):
    """Same planted feet, body shifted by dxy; joints re-solved by IK."""
    pos = state.body_pos + np.array([dxy[0], dxy[1], 0.0])
    angles, ok = leg_ik_all(model, state.foot_world - pos)
    assert np.all(ok)
    return make_state(model, pos, state.body_quat, angles, state.stance)


def test_interpolation_keeps_contacts(hex_model, hex_state):
    other = _shifted_same_feet(hex_model, hex_state, (0.03, 0.02))
    fractions = np.linspace(0.0, 1.0, 9)
    for s in interpolate_states(hex_model, hex_state, other, fractions):
        assert np.allclose(s.foot_world, hex_state.foot_world, atol=1e-9)
    mids = interpolate_states(hex_model, hex_state, other, [0.0, 1.0])
    assert np.allclose(mids[0].body_pos, hex_state.body_pos, atol=1e-12)
    assert np.allclose(mids[1].body_pos, other.body_pos, atol=1e-12)


def test_check_segment_ok_and_sample_count(hex_model, flat_map, hex_state):
    other = _shifted_same_feet(hex_model, hex_state, (0.05, 0.0))
    counter = CheckCounter()
    result = check_segment(hex_model, flat_map, hex_state, other, counter=counter)
    assert result.ok
    assert bool(result)
    dist = float(np.linalg.norm(other.body_pos - hex_state.body_pos))
    assert counter.n == max(1, math.ceil(dist / 0.01)) + 1


def test_check_segment_reports_first_failure(hex_model, flat_map, hex_state):
    sunk = make_state(
        hex_model,
        hex_state.body_pos - np.array([0.0, 0.0, 0.3]),
        hex_state.body_quat,
        hex_state.joint_angles,
        hex_state.stance,
    )
    result = check_segment(hex_model, flat_map, hex_state, sunk)
    assert not result.ok
    assert result.failure_index is not None
    assert 0.0 <= result.failure_fraction <= 1.0
    assert result.report is not None and not result.report.valid


def test_check_segment_rejects_bad_step(hex_model, flat_map, hex_state):
    with pytest.raises(ValueError):
        check_segment(hex_model, flat_map, hex_state, hex_state, step=0.0)
