"""Single-step full-body planning.

Pipeline per step: foothold selection, body posture optimization, linear
body/feet motion, lateral stabilization, SE3 B-spline smoothing, and full
constraint validation.  Every global planner extends its trees through
:func:`plan_step`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import robot as rb
from .constraints import (
    STABILITY_THRESHOLD,
    CheckCounter,
    ConstraintReport,
    check_state,
    stability_margin,
)
from .errors import (
    InsufficientKnots,
    NoFeasiblePosture,
    OutOfBounds,
    StepInfeasible,
    Unstabilizable,
)
from .geometry import (
    quat_from_rpy,
    quat_mul,
    quat_normalize,
    quat_slerp,
    quat_to_matrix,
    quat_yaw,
    quat_exp,
    quat_log,
    quat_conj,
    signed_distance_to_polygon,
    convex_hull_2d,
)
from .robot import FullBodyState, RobotModel, make_state
from .terrain import ElevationMap, height_at, heights_at, roughness_field

#: Foothold cost weights: slope [1/rad] and height variance [1/m^2].
FOOTHOLD_W_SLOPE = 1.0
FOOTHOLD_W_VARIANCE = 50.0
#: Side length of the default foothold search window [m].
FOOTHOLD_WINDOW = 0.10
#: Step-length shrink factor and candidate count of plan_step.
STEP_SHRINK = 0.7
STEP_CANDIDATES = 5
#: Maximum lateral displacement the stabilizer may apply [m].
MAX_STABILIZE_DISPLACEMENT = 0.2
#: Swing-phase window within a step (fractions of step progress).  Wide,
#: so trailing legs lift before the advancing body strains their reach.
SWING_START = 0.15
SWING_END = 0.85
#: Stab-knot displacement amplifications tried when smoothing dilutes the
#: lateral shift (quadratic spline realizes ~0.4x the knot offset at the
#: swing-window edges).
STAB_AMPLIFICATIONS = (1.0, 1.3, 1.6, 2.0)
#: Swing apex clearance above terrain under the swing chord [m].
SWING_CLEARANCE = 0.04
#: Largest yaw change a single step may command [rad].
MAX_YAW_STEP = 0.15
#: Largest roll/pitch change a single step may command [rad].
MAX_TILT_STEP = 0.1


@dataclass(frozen=True)
class SplineConfig:
    degree: int = 2
    dt: float = 1.0
    samples_per_segment: int = 8

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class StepPlan:
    states: tuple  # time-ordered FullBodyState sequence
    footholds: np.ndarray  # (L, 3) world contacts at step end
    swing_legs: tuple  # leg indices swung during this step
    body_knots: tuple  # three (pos, quat) knots: init, stabilized, goal

    @property
    def end_state(self) -> FullBodyState:
        return self.states[-1]


@dataclass(frozen=True)
class PostureGrid:
    """Search grid of optimize_posture (height fractions of standing height)."""

    height_lo: float = 0.5
    height_hi: float = 1.3
    height_step: float = 0.01
    tilt_range: float = 0.2
    tilt_step: float = 0.02


# --------------------------------------------------------------------------
# B-splines


def bspline_basis(i: int, j: int, t: float, t0: float, dt: float) -> float:
    """Uniform-knot De Boor-Cox basis coefficient B_{i,j}(t)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if j < 0:
        raise ValueError("degree must be non-negative")
    ti = t0 + i * dt
    if j == 0:
        return 1.0 if ti <= t < ti + dt else 0.0
    return (t - ti) / (j * dt) * bspline_basis(i, j - 1, t, t0, dt) + (
        ti + (j + 1) * dt - t
    ) / (j * dt) * bspline_basis(i + 1, j - 1, t, t0, dt)


def _clamped_knot_vector(n_knots: int, degree: int):
    interior = max(n_knots - degree, 1)
    return np.concatenate(
        [
            np.zeros(degree),
            np.arange(interior + 1, dtype=float),
            np.full(degree, float(interior)),
        ]
    )


def _basis_general(u, i, k, t):
    """Cox-de Boor recurrence on an arbitrary knot vector (0/0 -> 0)."""
    if k == 0:
        return 1.0 if u[i] <= t < u[i + 1] else 0.0
    out = 0.0
    d1 = u[i + k] - u[i]
    if d1 > 0:
        out += (t - u[i]) / d1 * _basis_general(u, i, k - 1, t)
    d2 = u[i + k + 1] - u[i + 1]
    if d2 > 0:
        out += (u[i + k + 1] - t) / d2 * _basis_general(u, i + 1, k - 1, t)
    return out


def bspline_se3(knots, cfg: SplineConfig = SplineConfig(), n_samples: int | None = None):
    """Cumulative SE3 B-spline through the knot poses, clamped at both ends.

    ``knots`` is a sequence of (position, quaternion) pairs, at least
    degree + 1 of them.  Translations blend with the basis functions;
    orientations blend in cumulative form through log/exp increments, so
    the first and last knots are interpolated exactly.  Returns a list of
    (position, quaternion) samples uniform in the spline parameter.
    """
    knots = [(np.asarray(p, dtype=float), quat_normalize(q)) for p, q in knots]
    k = cfg.degree
    if len(knots) < k + 1:
        raise InsufficientKnots(f"need at least {k + 1} knots, got {len(knots)}")
    n = len(knots)
    u = _clamped_knot_vector(n, k)
    t_end = u[-1]
    if n_samples is None:
        n_samples = cfg.samples_per_segment * (n - k) + 1
    ts = np.linspace(0.0, t_end, n_samples)

    d_pos = [knots[i][0] - knots[i - 1][0] for i in range(1, n)]
    d_rot = [
        quat_log(quat_mul(quat_conj(knots[i - 1][1]), knots[i][1])) for i in range(1, n)
    ]
    out = []
    for t in ts:
        te = min(t, t_end - 1e-12)
        basis = np.array([_basis_general(u, i, k, te) for i in range(n)])
        cumulative = np.cumsum(basis[::-1])[::-1]  # B~_i = sum_{l >= i} B_l
        pos = knots[0][0].copy()
        quat = knots[0][1].copy()
        for i in range(1, n):
            pos = pos + cumulative[i] * d_pos[i - 1]
            quat = quat_mul(quat, quat_exp(cumulative[i] * d_rot[i - 1]))
        out.append((pos, quat_normalize(quat)))
    return out


# --------------------------------------------------------------------------
# foothold selection


def select_foothold(emap: ElevationMap, nominal, window: float = FOOTHOLD_WINDOW):
    """Cheapest cell centre in the square window around ``nominal``.

    Cost is slope and height-variance weighted roughness over a disc of
    three cells; ties break by distance to nominal, then by (x, y).
    """
    nominal = np.asarray(nominal, dtype=float)[:2]
    res = emap.resolution
    radius = 3 * res
    half = window / 2.0
    if not emap.contains(nominal - half, margin=radius) or not emap.contains(
        nominal + half, margin=radius
    ):
        raise OutOfBounds("foothold window leaves the map")
    field_ = roughness_field(emap, radius)
    ix0 = int(math.ceil((nominal[0] - half - emap.origin[0]) / res - 1e-9))
    ix1 = int(math.floor((nominal[0] + half - emap.origin[0]) / res + 1e-9))
    iy0 = int(math.ceil((nominal[1] - half - emap.origin[1]) / res - 1e-9))
    iy1 = int(math.floor((nominal[1] + half - emap.origin[1]) / res + 1e-9))
    ixs, iys = np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1))
    ixs = ixs.ravel()
    iys = iys.ravel()
    cost = (
        FOOTHOLD_W_SLOPE * field_.slope[iys, ixs]
        + FOOTHOLD_W_VARIANCE * field_.variance[iys, ixs]
    )
    xs = emap.origin[0] + ixs * res
    ys = emap.origin[1] + iys * res
    dist = np.hypot(xs - nominal[0], ys - nominal[1])
    order = np.lexsort((ys, xs, dist, cost))
    best = order[0]
    return np.array([xs[best], ys[best], emap.heights[iys[best], ixs[best]]])


# --------------------------------------------------------------------------
# posture optimization


def _fit_yaw(model: RobotModel, footholds):
    """Least-squares yaw aligning the nominal stance with the footholds."""
    f = np.asarray(footholds)[:, :2]
    n = model.nominal_stance[:, :2]
    fc = f - f.mean(axis=0)
    nc = n - n.mean(axis=0)
    num = float(np.sum(nc[:, 0] * fc[:, 1] - nc[:, 1] * fc[:, 0]))
    den = float(np.sum(nc[:, 0] * fc[:, 0] + nc[:, 1] * fc[:, 1]))
    return math.atan2(num, den)


def optimize_posture(
    model: RobotModel,
    emap: ElevationMap,
    footholds,
    yaw: float | None = None,
    center_xy=None,
    grid: PostureGrid = PostureGrid(),
    counter: CheckCounter | None = None,
    max_checks: int | None = None,
    min_margin: float = 0.0,
    tilt_window: tuple | None = None,
):
    """Best body pose over the height/roll/pitch grid.

    Maximizes kinematic margin plus body height above the terrain under the
    body centre, subject to the full constraint check of the state built by
    IK to the footholds.  Yaw and horizontal position are fixed (derived
    from the footholds when not given).  Returns (position, quaternion).

    ``min_margin`` additionally requires the stance kinematic margin of a
    candidate to exceed the given reserve; ``tilt_window`` as
    (roll, pitch, band) restricts roll/pitch to within ``band`` of the
    given centre (both are used by the step planner to keep consecutive
    postures compatible).
    """
    footholds = np.asarray(footholds, dtype=float).reshape(model.leg_count, 3)
    if center_xy is None:
        center_xy = footholds[:, :2].mean(axis=0)
    center_xy = np.asarray(center_xy, dtype=float)
    if yaw is None:
        yaw = _fit_yaw(model, footholds)
    zc = height_at(emap, center_xy)

    # no candidate can be stable if the fixed COM projection is not
    hull = convex_hull_2d(footholds[:, :2])
    if signed_distance_to_polygon(center_xy, hull) <= STABILITY_THRESHOLD:
        raise NoFeasiblePosture("COM projection outside the support polygon")

    s = model.standing_height
    heights = np.arange(grid.height_lo * s, grid.height_hi * s + 1e-9, grid.height_step)
    tilts = np.arange(-grid.tilt_range, grid.tilt_range + 1e-9, grid.tilt_step)
    nh, nt = heights.size, tilts.size

    cy, sy = math.cos(yaw), math.sin(yaw)
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    roll_axis = tilts
    pitch_axis = tilts
    if tilt_window is not None:
        r0, p0, band = tilt_window
        roll_axis = tilts[np.abs(tilts - r0) <= band]
        pitch_axis = tilts[np.abs(tilts - p0) <= band]
        if roll_axis.size == 0 or pitch_axis.size == 0:
            raise NoFeasiblePosture("tilt window excludes the whole grid")
    rolls, pitches = np.meshgrid(roll_axis, pitch_axis, indexing="ij")
    rolls = rolls.ravel()
    pitches = pitches.ravel()
    cr, sr = np.cos(rolls), np.sin(rolls)
    cp, sp = np.cos(pitches), np.sin(pitches)
    # R = Rz @ Ry(pitch) @ Rx(roll); build Ry@Rx batch then compose
    Rrp = np.zeros((rolls.size, 3, 3))
    Rrp[:, 0, 0] = cp
    Rrp[:, 0, 1] = sp * sr
    Rrp[:, 0, 2] = sp * cr
    Rrp[:, 1, 1] = cr
    Rrp[:, 1, 2] = -sr
    Rrp[:, 2, 0] = -sp
    Rrp[:, 2, 1] = cp * sr
    Rrp[:, 2, 2] = cp * cr
    v0 = (footholds - np.array([center_xy[0], center_xy[1], zc])) @ Rz  # Rz^T applied

    objective = np.full(nh * rolls.size, -np.inf)
    for hi_, h in enumerate(heights):
        v = v0.copy()
        v[:, 2] -= h
        feet_body = np.einsum("rji,lj->rli", Rrp, v)  # Rrp^T @ v
        margins = rb.leg_margin_batch(model, feet_body)
        _, ok = rb.leg_ik_all(model, feet_body)
        feasible = np.all(ok, axis=-1) & np.all(margins > min_margin, axis=-1)
        obj = np.where(feasible, margins.min(axis=-1) + h, -np.inf)
        objective[hi_ * rolls.size : (hi_ + 1) * rolls.size] = obj

    order = np.lexsort((np.arange(objective.size), -objective))
    checks = 0
    for idx in order:
        if not np.isfinite(objective[idx]):
            break
        if max_checks is not None and checks >= max_checks:
            break
        hi_, rp = divmod(idx, rolls.size)
        pos = np.array([center_xy[0], center_xy[1], zc + heights[hi_]])
        quat = quat_from_rpy(rolls[rp], pitches[rp], yaw)
        R = quat_to_matrix(quat)
        feet_body = (footholds - pos) @ R
        angles, ok = rb.leg_ik_all(model, feet_body)
        if not np.all(ok):
            continue
        state = make_state(model, pos, quat, angles, np.ones(model.leg_count, bool))
        checks += 1
        if check_state(model, emap, state, counter=counter).valid:
            return pos, quat
    raise NoFeasiblePosture("no grid posture satisfies all constraints")


# --------------------------------------------------------------------------
# stabilization


def _body_left_axis(quat):
    return quat_to_matrix(quat)[:, 1][:2]


def _stabilize_displacement(model, emap, state, max_disp=MAX_STABILIZE_DISPLACEMENT):
    """Minimal horizontal displacement restoring the stability margin.

    Returns the displacement vector (2,) or None when no displacement up to
    ``max_disp`` both stabilizes the sample and keeps every foot reachable.
    Lateral (body left/right) directions are preferred.
    """
    hull = support_polygon_of(state)
    com = state.body_pos[:2]
    if signed_distance_to_polygon(com, hull) > STABILITY_THRESHOLD:
        return np.zeros(2)
    left = _body_left_axis(state.body_quat)
    nl = np.linalg.norm(left)
    left = left / nl if nl > 1e-9 else np.array([0.0, 1.0])
    centroid = np.mean(np.asarray(hull).reshape(-1, 2), axis=0)
    towards = centroid - com
    candidates = [left, -left] if np.dot(towards, left) >= 0 else [-left, left]
    if np.linalg.norm(towards) > 1e-9:
        candidates.append(towards / np.linalg.norm(towards))
    for a in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
        candidates.append(np.array([math.cos(a), math.sin(a)]))
    # smallest magnitude wins; direction order breaks ties (lateral first)
    for mag in np.arange(0.005, max_disp + 1e-9, 0.005):
        for direction in candidates:
            com2 = com + mag * direction
            if signed_distance_to_polygon(com2, hull) <= STABILITY_THRESHOLD + 0.01:
                continue
            shifted = _shift_body(model, state, mag * direction)
            if shifted is not None:
                return mag * direction
    return None


def support_polygon_of(state):
    pts = state.foot_world[state.stance][:, :2]
    return convex_hull_2d(pts)


def _shift_body(model, state, delta_xy):
    """Same state with the body displaced horizontally, feet kept in place."""
    pos = state.body_pos + np.array([delta_xy[0], delta_xy[1], 0.0])
    R = quat_to_matrix(state.body_quat)
    feet_body = (state.foot_world - pos) @ R
    angles, ok = rb.leg_ik_all(model, feet_body)
    if not np.all(ok):
        return None
    return FullBodyState(pos, state.body_quat, angles, state.stance, state.foot_world.copy())


def stabilize_path(model: RobotModel, emap: ElevationMap, states):
    """Displace unstable samples of a linear path sideways.

    Returns (q_stab, adjusted) where q_stab is the (position, quaternion)
    body pose at the sample that required the largest displacement (the
    midpoint pose when every sample was already stable) and ``adjusted`` is
    the displaced state sequence.
    """
    states = list(states)
    if not states:
        raise Unstabilizable("empty path")
    adjusted = []
    best_mag = -1.0
    stab_pose = None
    for st in states:
        disp = _stabilize_displacement(model, emap, st)
        if disp is None:
            raise Unstabilizable("no lateral displacement stabilizes a sample")
        mag = float(np.linalg.norm(disp))
        if mag > 0:
            st2 = _shift_body(model, st, disp)
            if st2 is None:
                raise Unstabilizable("displacement breaks leg reachability")
        else:
            st2 = st
        adjusted.append(st2)
        if mag > best_mag:
            best_mag = mag
            stab_pose = (st2.body_pos.copy(), st2.body_quat.copy())
    if best_mag <= 0.0:
        mid = adjusted[len(adjusted) // 2]
        stab_pose = (mid.body_pos.copy(), mid.body_quat.copy())
    return stab_pose, adjusted


# --------------------------------------------------------------------------
# single step planning


def _wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def gait_group(model: RobotModel, phase: int):
    groups = model.gait_groups
    return groups[phase % len(groups)]


def plan_step(
    model: RobotModel,
    emap: ElevationMap,
    start: FullBodyState,
    target_xy,
    target_yaw: float | None = None,
    phase: int = 0,
    window: float = FOOTHOLD_WINDOW,
    counter: CheckCounter | None = None,
) -> StepPlan:
    """Plan one gait step of the body towards ``target_xy``.

    Candidate strides shrink geometrically from the longest; the first
    candidate whose full state sequence validates wins.  ``phase`` selects
    the swing group from the gait schedule.
    """
    target_xy = np.asarray(target_xy, dtype=float)[:2]
    dist = float(np.linalg.norm(target_xy - start.xy))
    start_pose = (start.body_pos.copy(), start.body_quat.copy())
    if dist < 1e-9:
        return StepPlan(
            states=(start,),
            footholds=start.foot_world.copy(),
            swing_legs=(),
            body_knots=(start_pose, start_pose, start_pose),
        )
    direction = (target_xy - start.xy) / dist
    heading = math.atan2(direction[1], direction[0]) if target_yaw is None else target_yaw
    n_groups = len(model.gait_groups)
    group = gait_group(model, phase)
    stride_max = min(model.max_step / n_groups, dist)
    # facing far away from the target: rotate on the spot until roughly
    # aligned, then translate
    yaw_error = _wrap_angle(heading - quat_yaw(start.body_quat))
    strides = [stride_max * (STEP_SHRINK**k) for k in range(STEP_CANDIDATES)]
    if target_yaw is None and abs(yaw_error) > math.pi / 2:
        strides = [0.0]
    last_error = None
    for require_reserve in (True, False):
        for stride in strides:
            try:
                return _plan_step_candidate(
                    model, emap, start, direction, heading, stride, group,
                    n_groups, window, counter, require_reserve,
                )
            except (
                NoFeasiblePosture, Unstabilizable, OutOfBounds, _CandidateFailed
            ) as exc:
                last_error = exc
    raise StepInfeasible(f"all stride candidates failed: {last_error}")


class _CandidateFailed(Exception):
    pass


#: Stand-in report for a stance-transition pair that fails the stability
#: re-check; flagged as a pure stability failure so amplification retries.
_UNSTABLE_BOUNDARY = ConstraintReport(
    in_workspace=True, collision_free=True, stable=False,
    stability_margin=-math.inf, kinematic_margin=0.0,
)


def _boundary_pairs_stable(states) -> bool:
    """Stability of every stance transition under the intersected support.

    Re-validating a pair of consecutive states interpolates with the
    intersection of their stance sets.  The signed distance to a convex
    polygon is concave along a line, so it suffices that both endpoint
    states keep the stability margin with that reduced support.
    """
    for a, b in zip(states, states[1:]):
        stance = a.stance & b.stance
        for st in (a, b):
            if np.array_equal(stance, st.stance):
                continue  # already verified by check_state
            if not np.any(stance):
                return False
            probe = FullBodyState(
                st.body_pos, st.body_quat, st.joint_angles, stance, st.foot_world
            )
            if stability_margin(probe) <= STABILITY_THRESHOLD:
                return False
    return True


def nominal_state(
    model: RobotModel,
    emap: ElevationMap,
    xy,
    yaw: float = 0.0,
    window: float = FOOTHOLD_WINDOW,
    counter: CheckCounter | None = None,
    max_checks: int | None = 60,
) -> FullBodyState:
    """Standing state at ``xy``: footholds near the nominal stance plus an
    optimized body posture.  Used for planner start and goal states."""
    xy = np.asarray(xy, dtype=float)[:2]
    cy, sy = math.cos(yaw), math.sin(yaw)
    footholds = np.empty((model.leg_count, 3))
    for leg in range(model.leg_count):
        nominal = xy + np.array(
            [
                cy * model.nominal_stance[leg, 0] - sy * model.nominal_stance[leg, 1],
                sy * model.nominal_stance[leg, 0] + cy * model.nominal_stance[leg, 1],
            ]
        )
        footholds[leg] = select_foothold(emap, nominal, window)
    pos, quat = optimize_posture(
        model, emap, footholds, yaw=yaw, center_xy=xy,
        counter=counter, max_checks=max_checks,
    )
    R = quat_to_matrix(quat)
    angles, ok = rb.leg_ik_all(model, (footholds - pos) @ R)
    if not np.all(ok):
        raise NoFeasiblePosture("optimized posture lost foothold reachability")
    return FullBodyState(pos, quat, angles, np.ones(model.leg_count, bool), footholds)


def _swing_z(emap, p_from, p_to, w):
    """Swing foot height at progress w of the lift chord."""
    chord = np.linspace(p_from[:2], p_to[:2], 8)
    max_h = float(heights_at(emap, chord).max())
    base = (1 - w) * p_from[2] + w * p_to[2]
    apex = max(0.03, max_h + SWING_CLEARANCE - max(p_from[2], p_to[2]))
    tent = 2.0 * min(w, 1.0 - w)
    return base + apex * tent


def _plan_step_candidate(
    model, emap, start, direction, heading, stride, group, n_groups, window,
    counter, require_reserve=True,
):
    start_yaw = quat_yaw(start.body_quat)
    yaw_end = start_yaw + np.clip(_wrap_angle(heading - start_yaw), -MAX_YAW_STEP, MAX_YAW_STEP)
    end_xy = start.xy + direction * stride
    # A foot placed now next lifts off (n_groups - swing window) strides of
    # body travel later; biasing the placement half that distance forward
    # centres its excursion about the nominal stance.
    bias = 0.5 * stride * (n_groups - (SWING_END - SWING_START))
    # same idea for turning: rotate the placement ahead by half the yaw the
    # body is expected to sweep before the foot lifts again
    yaw_place = yaw_end + 0.5 * (n_groups - (SWING_END - SWING_START)) * (
        yaw_end - start_yaw
    )

    cy, sy = math.cos(yaw_place), math.sin(yaw_place)
    footholds = start.foot_world.copy()
    for leg in group:
        nominal = end_xy + np.array(
            [
                cy * model.nominal_stance[leg, 0] - sy * model.nominal_stance[leg, 1],
                sy * model.nominal_stance[leg, 0] + cy * model.nominal_stance[leg, 1],
            ]
        ) + direction * bias
        try:
            footholds[leg] = select_foothold(emap, nominal, window)
        except OutOfBounds as exc:
            raise _CandidateFailed(str(exc)) from None

    R0 = quat_to_matrix(start.body_quat)
    tilt_window = (
        math.atan2(R0[2, 1], R0[2, 2]),  # roll
        -math.asin(np.clip(R0[2, 0], -1.0, 1.0)),  # pitch
        MAX_TILT_STEP,
    )
    # require a reach reserve for the legs left trailing; the caller drops
    # the reserve only after every stride candidate has failed with it
    end_pos, end_quat = optimize_posture(
        model, emap, footholds, yaw=yaw_end, center_xy=end_xy,
        counter=counter, max_checks=60,
        min_margin=(0.5 * stride + 0.03) if require_reserve else 0.0,
        tilt_window=tilt_window,
    )

    # enough samples that at least two fall before lift-off and after
    # touchdown: the neighbours of the pinned endpoint poses must remain
    # displaceable for the reduced-support stabilization below
    n_samples = max(13, int(math.ceil(stride / 0.02)) + 1)
    swing_set = set(group)

    def build_states(poses):
        states = []
        for si, (pos, quat) in enumerate(poses):
            u = si / (len(poses) - 1)
            feet = np.empty_like(footholds)
            stance = np.ones(model.leg_count, dtype=bool)
            for leg in range(model.leg_count):
                if leg in swing_set and SWING_START < u < SWING_END:
                    w = (u - SWING_START) / (SWING_END - SWING_START)
                    p_from = start.foot_world[leg]
                    p_to = footholds[leg]
                    feet[leg, :2] = (1 - w) * p_from[:2] + w * p_to[:2]
                    feet[leg, 2] = _swing_z(emap, p_from, p_to, w)
                    stance[leg] = False
                elif leg in swing_set and u >= SWING_END:
                    feet[leg] = footholds[leg]
                else:
                    feet[leg] = start.foot_world[leg]
            R = quat_to_matrix(quat)
            feet_body = (feet - pos) @ R
            angles, ok = rb.leg_ik_all(model, feet_body)
            if not np.all(ok):
                legs = tuple(int(i) for i in np.where(~ok)[0])
                raise _CandidateFailed(f"IK failed at sample {si}, legs {legs}")
            states.append(FullBodyState(pos, quat, angles, stance, feet))
        return states

    # linear body motion, then stabilization, then spline smoothing
    linear_poses = [
        (
            (1 - u) * start.body_pos + u * end_pos,
            quat_slerp(start.body_quat, end_quat, u),
        )
        for u in np.linspace(0.0, 1.0, n_samples)
    ]
    try:
        linear_states = build_states(linear_poses)
    except _CandidateFailed as exc:
        raise _CandidateFailed(f"linear {exc}") from None
    disps = np.zeros((n_samples, 2))
    worst_mag = 0.0
    for si, st in enumerate(linear_states):
        # stabilize against the support the neighbouring samples rely on as
        # well: re-validation of a sample pair interpolates with the
        # intersected stance, so lift-off / touchdown neighbours must
        # already stand inside the reduced polygon
        stance = st.stance.copy()
        if si > 0:
            stance &= linear_states[si - 1].stance
        if si + 1 < n_samples:
            stance &= linear_states[si + 1].stance
        probe = FullBodyState(
            st.body_pos, st.body_quat, st.joint_angles, stance, st.foot_world
        )
        disp = _stabilize_displacement(model, emap, probe)
        if disp is None:
            raise _CandidateFailed("a sample cannot be stabilized laterally")
        disps[si] = disp
        worst_mag = max(worst_mag, float(np.linalg.norm(disp)))

    amps = STAB_AMPLIFICATIONS if worst_mag > 0 else (1.0,)
    last_fail = "validation failed along the smoothed step"
    for amp in amps:
        # one control pose per sample so the smoothed body path tracks the
        # laterally shifted polyline throughout the swing window
        knots = tuple(
            (pos + amp * np.array([dx, dy, 0.0]), quat)
            for (pos, quat), (dx, dy) in zip(linear_poses, disps)
        )
        # keep the endpoints exactly on the commanded start / end poses
        knots = ((start.body_pos, start.body_quat),) + knots[1:-1] + (
            (end_pos, end_quat),
        )
        # emit samples densely in space, not just in spline parameter: wide
        # stabilization sways stretch the curve, and consecutive states more
        # than a few centimetres apart cannot be re-validated (the chord
        # between them may pull a planted foot out of reach)
        sway = sum(
            float(np.linalg.norm(q[0] - p[0])) for p, q in zip(knots, knots[1:])
        )
        n_out = max(n_samples, int(math.ceil(sway / 0.015)) + 1)
        poses = bspline_se3(knots, SplineConfig(degree=2), n_samples=n_out)
        try:
            states = build_states(poses)
        except _CandidateFailed as exc:
            last_fail = str(exc)
            continue
        failed_report = None
        for st in states:
            report = check_state(model, emap, st, counter=counter)
            if not report.valid:
                failed_report = report
                break
        if failed_report is None and not _boundary_pairs_stable(states):
            # pretend a stability failure so a larger lateral shift is tried
            failed_report = _UNSTABLE_BOUNDARY
        if failed_report is None:
            return StepPlan(
                states=tuple(states),
                footholds=footholds,
                swing_legs=tuple(group),
                body_knots=knots,
            )
        # amplifying the lateral shift only helps pure stability failures
        if failed_report.collision_free and failed_report.in_workspace:
            last_fail = "stability failed along the smoothed step"
        else:
            last_fail = "collision or workspace failed along the smoothed step"
            break
    raise _CandidateFailed(last_fail)
