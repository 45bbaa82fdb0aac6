import math

import numpy as np
import pytest

from legplan.constraints import check_segment, check_state
from legplan.errors import InsufficientKnots, NoFeasiblePosture, OutOfBounds
from legplan.geometry import quat_from_rpy, quat_to_matrix
from legplan.local_planner import (
    PostureGrid,
    SplineConfig,
    bspline_basis,
    bspline_se3,
    nominal_state,
    optimize_posture,
    plan_step,
    select_foothold,
)
from legplan.robot import leg_ik_all, leg_margin, make_state
from legplan.terrain import height_at, roughness_at

# --------------------------------------------------------------------------
# B-splines


def test_basis_partition_of_unity():
    rng = np.random.default_rng(7)
    t0, dt = -2.0, 0.7
    for degree in range(4):
        ts = rng.uniform(t0 + 5 * dt, t0 + 20 * dt, size=1000)
        for t in ts:
            lo = int(math.floor((t - t0) / dt)) - degree
            total = sum(
                bspline_basis(i, degree, t, t0, dt) for i in range(lo, lo + degree + 2)
            )
            assert abs(total - 1.0) <= 1e-12


def test_basis_local_support():
    assert bspline_basis(0, 2, 5.0, 0.0, 1.0) == 0.0
    assert bspline_basis(0, 0, 0.5, 0.0, 1.0) == 1.0
    assert bspline_basis(0, 0, 1.5, 0.0, 1.0) == 0.0


def test_spline_interpolates_endpoints():
    knots = [
        (np.array([0.0, 0.0, 0.3]), quat_from_rpy(0.0, 0.0, 0.0)),
        (np.array([0.2, 0.1, 0.35]), quat_from_rpy(0.05, -0.03, 0.2)),
        (np.array([0.4, 0.0, 0.3]), quat_from_rpy(0.0, 0.05, 0.4)),
    ]
    samples = bspline_se3(knots, SplineConfig(degree=2))
    p0, q0 = samples[0]
    p1, q1 = samples[-1]
    assert np.allclose(p0, knots[0][0], atol=1e-9)
    assert np.allclose(p1, knots[-1][0], atol=1e-9)
    # q and -q encode the same rotation
    assert min(np.abs(q0 - knots[0][1]).max(), np.abs(q0 + knots[0][1]).max()) <= 1e-9
    assert min(np.abs(q1 - knots[-1][1]).max(), np.abs(q1 + knots[-1][1]).max()) <= 1e-9


def test_spline_identical_knots_is_constant():
    pose = (np.array([1.0, 2.0, 0.3]), quat_from_rpy(0.1, 0.0, 0.5))
    samples = bspline_se3([pose] * 4, SplineConfig(degree=2), n_samples=25)
    for p, q in samples:
        assert np.allclose(p, pose[0], atol=1e-12)
        assert min(np.abs(q - pose[1]).max(), np.abs(q + pose[1]).max()) <= 1e-9


def test_spline_velocity_has_no_jumps():
    rng = np.random.default_rng(3)
    pts = np.cumsum(rng.uniform(-0.1, 0.2, size=(6, 3)), axis=0)
    knots = [(p, quat_from_rpy(0.0, 0.0, 0.0)) for p in pts]
    samples = bspline_se3(knots, SplineConfig(degree=2), n_samples=400)
    pos = np.array([p for p, _ in samples])
    speed = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    speed = speed[speed > 1e-12]
    ratios = speed[1:] / speed[:-1]
    assert ratios.max() < 10.0 and ratios.min() > 0.1


def test_spline_requires_enough_knots():
    pose = (np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(InsufficientKnots):
        bspline_se3([pose, pose], SplineConfig(degree=2))


def test_spline_config_validation():
    with pytest.raises(ValueError):
        SplineConfig(degree=0)
    with pytest.raises(ValueError):
        SplineConfig(dt=0.0)


# --------------------------------------------------------------------------
# foothold selection (brute-force oracle)


def _foothold_oracle(emap, nominal, window):
    res = emap.resolution
    half = window / 2.0
    radius = 3 * res
    best = None
    ix0 = int(math.ceil((nominal[0] - half - emap.origin[0]) / res - 1e-9))
    ix1 = int(math.floor((nominal[0] + half - emap.origin[0]) / res + 1e-9))
    iy0 = int(math.ceil((nominal[1] - half - emap.origin[1]) / res - 1e-9))
    iy1 = int(math.floor((nominal[1] + half - emap.origin[1]) / res + 1e-9))
    for iy in range(iy0, iy1 + 1):
        for ix in range(ix0, ix1 + 1):
            x = emap.origin[0] + ix * res
            y = emap.origin[1] + iy * res
            r = roughness_at(emap, (x, y), radius)
            cost = 1.0 * r["slope"] + 50.0 * r["height_variance"]
            key = (cost, math.hypot(x - nominal[0], y - nominal[1]), x, y)
            if best is None or key < best[0]:
                best = (key, np.array([x, y, emap.heights[iy, ix]]))
    return best[1]


@pytest.mark.parametrize("scenario", ["flat", "rough"])
def test_select_foothold_matches_bruteforce(scenario, flat_map, rough_map, rng):
    emap = flat_map if scenario == "flat" else rough_map
    for _ in range(10):
        nominal = rng.uniform(1.0, 5.0, size=2)
        got = select_foothold(emap, nominal, window=0.10)
        ref = _foothold_oracle(emap, nominal, 0.10)
        assert np.array_equal(got, ref)


def test_select_foothold_window_out_of_bounds(flat_map):
    with pytest.raises(OutOfBounds):
        select_foothold(flat_map, (0.01, 3.0), window=0.10)


# --------------------------------------------------------------------------
# posture optimization (exhaustive oracle)


def _posture_oracle(model, emap, footholds, grid, yaw, center_xy):
    zc = height_at(emap, center_xy)
    s = model.standing_height
    heights = np.arange(grid.height_lo * s, grid.height_hi * s + 1e-9, grid.height_step)
    tilts = np.arange(-grid.tilt_range, grid.tilt_range + 1e-9, grid.tilt_step)
    candidates = []
    idx = 0
    for h in heights:
        for roll in tilts:
            for pitch in tilts:
                pos = np.array([center_xy[0], center_xy[1], zc + h])
                quat = quat_from_rpy(roll, pitch, yaw)
                R = quat_to_matrix(quat)
                feet_body = (np.asarray(footholds) - pos) @ R
                _, ok = leg_ik_all(model, feet_body)
                if np.all(ok):
                    margins = [
                        leg_margin(model, leg, feet_body[leg])
                        for leg in range(model.leg_count)
                    ]
                    if min(margins) > 0.0:
                        candidates.append((-(min(margins) + h), idx, pos, quat))
                idx += 1
    candidates.sort(key=lambda c: (c[0], c[1]))
    for _, _, pos, quat in candidates:
        feet_body = (np.asarray(footholds) - pos) @ quat_to_matrix(quat)
        angles, ok = leg_ik_all(model, feet_body)
        state = make_state(model, pos, quat, angles, np.ones(model.leg_count, bool))
        if check_state(model, emap, state).valid:
            return pos, quat
    raise NoFeasiblePosture


@pytest.mark.parametrize("scenario", ["flat", "rough"])
def test_optimize_posture_matches_exhaustive(scenario, hex_model, flat_map, rough_map, rng):
    emap = flat_map if scenario == "flat" else rough_map
    grid = PostureGrid(height_step=0.03, tilt_step=0.1)
    done = 0
    while done < 5:
        center = rng.uniform(1.5, 4.5, size=2)
        feet = hex_model.nominal_stance.copy()
        feet[:, :2] += center + rng.uniform(-0.02, 0.02, size=(hex_model.leg_count, 2))
        feet = np.array([
            [f[0], f[1], height_at(emap, f[:2])] for f in feet
        ])
        try:
            ref_pos, ref_quat = _posture_oracle(
                hex_model, emap, feet, grid, 0.0, center
            )
        except NoFeasiblePosture:
            continue
        pos, quat = optimize_posture(
            hex_model, emap, feet, yaw=0.0, center_xy=center, grid=grid,
        )
        assert np.allclose(pos, ref_pos, atol=1e-12)
        assert np.allclose(quat, ref_quat, atol=1e-12)
        done += 1


def test_optimize_posture_rejects_unstable_com(hex_model, flat_map):
    feet = hex_model.nominal_stance.copy()
    feet[:, :2] += np.array([3.0, 3.0])
    feet[:, 2] = 0.0
    with pytest.raises(NoFeasiblePosture):
        optimize_posture(hex_model, flat_map, feet, center_xy=(4.5, 3.0))


# --------------------------------------------------------------------------
# stepping


def test_nominal_state_is_valid(hex_model, flat_map):
    st = nominal_state(hex_model, flat_map, (2.0, 3.0))
    assert np.allclose(st.xy, (2.0, 3.0), atol=1e-12)
    assert np.all(st.stance)
    assert check_state(hex_model, flat_map, st).valid


def test_plan_step_produces_auditable_motion(hex_model, flat_map):
    start = nominal_state(hex_model, flat_map, (2.0, 3.0))
    plan = plan_step(hex_model, flat_map, start, (3.0, 3.0))
    states = plan.states
    assert len(states) >= 2
    assert np.linalg.norm(plan.end_state.xy - start.xy) > 0.0
    for s in states:
        assert check_state(hex_model, flat_map, s).valid
    for a, b in zip(states[:-1], states[1:]):
        assert check_segment(hex_model, flat_map, a, b).ok
    # swung feet end on the ground, within the foothold window
    for leg in plan.swing_legs:
        f = plan.footholds[leg]
        assert abs(f[2] - height_at(flat_map, f[:2])) <= 1e-9


def test_plan_step_moves_toward_target(quad_model, flat_map):
    start = nominal_state(quad_model, flat_map, (2.0, 3.0))
    plan = plan_step(quad_model, flat_map, start, (3.0, 3.0))
    assert plan.end_state.xy[0] > start.xy[0]
    for s in plan.states:
        assert check_state(quad_model, flat_map, s).valid
