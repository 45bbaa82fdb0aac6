import math

import numpy as np
import pytest

from legplan.errors import LimitViolation, NoStanceLegs, Unreachable
from legplan.robot import (
    hexapod,
    kinematic_margin,
    leg_fk,
    leg_fk_all,
    leg_ik,
    leg_ik_all,
    leg_margin,
    leg_margin_batch,
    make_robot,
    make_state,
    quadruped,
    workspace_contains,
)


def _random_angles(model, rng, n):
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    return lo + (hi - lo) * rng.uniform(0.05, 0.95, size=(n, model.leg_count, 3))


def test_degrees_of_freedom():
    assert 6 + 3 * hexapod().leg_count == 24
    assert 6 + 3 * quadruped().leg_count == 18


def test_make_robot_names():
    assert make_robot("hexapod").leg_count == 6
    assert make_robot("quadruped").leg_count == 4
    with pytest.raises(ValueError):
        make_robot("biped")


@pytest.mark.parametrize("name", ["hexapod", "quadruped"])
def test_fk_ik_roundtrip(name, rng):
    model = make_robot(name)
    for angles in _random_angles(model, rng, 50):
        for leg in range(model.leg_count):
            foot = leg_fk(model, leg, angles[leg])
            solved = leg_ik(model, leg, foot)
            foot2 = leg_fk(model, leg, solved)
            assert np.allclose(foot, foot2, atol=1e-9)


@pytest.mark.parametrize("name", ["hexapod", "quadruped"])
def test_ik_all_matches_single_leg(name, rng):
    model = make_robot(name)
    angles = _random_angles(model, rng, 8)
    feet = leg_fk_all(model, angles)
    solved, ok = leg_ik_all(model, feet)
    assert np.all(ok)
    assert np.allclose(leg_fk_all(model, solved), feet, atol=1e-9)


def test_ik_error_types(hex_model):
    with pytest.raises(Unreachable):
        leg_ik(hex_model, 0, np.array([5.0, 0.0, 0.0]))
    # straight ahead of the hip but above the body plane: reachable radius,
    # joint limits forbid it (femur cannot lift that far with tibia folded)
    hip = hex_model.hip_positions[0]
    with pytest.raises((LimitViolation, Unreachable)):
        leg_ik(hex_model, 0, hip + np.array([0.05, 0.0, 0.35]))


def test_nominal_stance_reachable():
    for model in (hexapod(), quadruped()):
        angles, ok = leg_ik_all(model, model.nominal_stance)
        assert np.all(ok)


def _margin_oracle(model, leg, foot_body, n_dirs=146, tol=2e-4):
    """Minimum distance to workspace exit by bisection along many rays."""
    if not workspace_contains(model, leg, foot_body):
        return 0.0
    # Fibonacci sphere of directions
    k = np.arange(n_dirs)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    z = 1.0 - 2.0 * (k + 0.5) / n_dirs
    r = np.sqrt(1.0 - z * z)
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    best = math.inf
    for d in dirs:
        lo, hi = 0.0, 2.0 * model.reach
        if workspace_contains(model, leg, foot_body + hi * d):
            continue
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if workspace_contains(model, leg, foot_body + mid * d):
                lo = mid
            else:
                hi = mid
        best = min(best, hi)
    return 0.0 if math.isinf(best) else best


@pytest.mark.parametrize("name", ["hexapod", "quadruped"])
def test_leg_margin_matches_raycast_oracle(name, rng):
    model = make_robot(name)
    checked = 0
    while checked < 6:
        angles = _random_angles(model, rng, 1)[0][0]
        foot = leg_fk(model, 0, angles)
        ref = _margin_oracle(model, 0, foot)
        if ref < 0.01:  # skip near-boundary points, both estimates noisy there
            continue
        got = leg_margin(model, 0, foot)
        # the distance field is voxelised; allow a few voxels of slack
        assert got == pytest.approx(ref, abs=0.012)
        checked += 1


def test_leg_margin_zero_outside(hex_model):
    assert leg_margin(hex_model, 0, np.array([5.0, 0.0, 0.0])) == 0.0


def test_leg_margin_batch_matches_scalar(hex_model, rng):
    angles = _random_angles(hex_model, rng, 4)
    feet = leg_fk_all(hex_model, angles)
    batch = leg_margin_batch(hex_model, feet)
    for i in range(4):
        for leg in range(hex_model.leg_count):
            assert batch[i, leg] == pytest.approx(
                leg_margin(hex_model, leg, feet[i, leg]), abs=1e-6
            )


def test_kinematic_margin_requires_stance(hex_model):
    angles = np.zeros((hex_model.leg_count, 3))
    angles[:, 2] = -1.5
    feet = leg_fk_all(hex_model, angles)
    state = make_state(
        hex_model,
        np.array([0.0, 0.0, 0.3]),
        np.array([1.0, 0.0, 0.0, 0.0]),
        angles,
        np.zeros(hex_model.leg_count, dtype=bool),
    )
    with pytest.raises(NoStanceLegs):
        kinematic_margin(hex_model, state)
    stance_state = make_state(
        hex_model,
        np.array([0.0, 0.0, 0.3]),
        np.array([1.0, 0.0, 0.0, 0.0]),
        angles,
        np.ones(hex_model.leg_count, dtype=bool),
    )
    assert kinematic_margin(hex_model, stance_state) > 0.0


def test_make_state_derives_foot_world(hex_model):
    angles = np.zeros((hex_model.leg_count, 3))
    angles[:, 2] = -1.5
    pos = np.array([1.0, 2.0, 0.25])
    quat = np.array([1.0, 0.0, 0.0, 0.0])
    state = make_state(hex_model, pos, quat, angles, np.ones(6, dtype=bool))
    feet_body = leg_fk_all(hex_model, angles)
    assert np.allclose(state.foot_world, pos + feet_body, atol=1e-12)
    scaled = make_state(hex_model, pos, np.array([2.0, 0.0, 0.0, 0.0]), angles, np.ones(6, bool))
    assert np.allclose(scaled.body_quat, quat)  # quaternions are normalised
