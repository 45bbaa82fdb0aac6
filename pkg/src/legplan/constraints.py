"""Validity checking of full-body states and interpolated path segments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import robot as rb
from .errors import NoStanceLegs, OutOfBounds
from .geometry import (
    convex_hull_2d,
    quat_slerp,
    quat_to_matrix,
    segment_segment_distance,
    signed_distance_to_polygon,
)
from .robot import FullBodyState, RobotModel, make_state
from .terrain import ElevationMap, heights_at

#: Stability margin the COM projection must exceed [m].
STABILITY_THRESHOLD = 0.02
#: Terrain clearance required of every capsule sample [m].
TERRAIN_CLEARANCE = 0.01
#: Capsule axis sampling step [m].
CAPSULE_SAMPLE_STEP = 0.01
#: Stance feet may sit this close to the terrain surface [m].
CONTACT_TOLERANCE = 0.02
#: Tibia samples within this distance of the foot point are exempt from
#: the terrain clearance test (feet are contact elements); scaled up for
#: thick shanks [m].
FOOT_EXEMPT_RADIUS = 0.035
#: Default body-travel spacing of segment re-validation [m].
SEGMENT_STEP = 0.01


class CheckCounter:
    """Counts constraint-state evaluations; the planner's virtual clock."""

    __slots__ = ("n",)

    def __init__(self):
        self.n = 0


@dataclass(frozen=True)
class ConstraintReport:
    in_workspace: bool
    collision_free: bool
    stable: bool
    stability_margin: float
    kinematic_margin: float

    @property
    def valid(self):
        return self.in_workspace and self.collision_free and self.stable


@dataclass(frozen=True)
class SegmentResult:
    ok: bool
    failure_index: int | None = None
    failure_fraction: float | None = None
    report: ConstraintReport | None = None

    def __bool__(self):
        return self.ok


# --------------------------------------------------------------------------
# support polygon and stability


def support_polygon(state: FullBodyState):
    """Convex hull (CCW) of the stance-foot horizontal projections."""
    if not np.any(state.stance):
        raise NoStanceLegs("support polygon needs at least one stance leg")
    pts = state.foot_world[state.stance][:, :2]
    return convex_hull_2d(pts)

def stability_margin(state: FullBodyState) -> float:
    """Signed distance of the COM projection to the support polygon edge.

    The COM is approximated at the body-frame origin.  Positive inside,
    non-positive for degenerate (< 3 feet) support.
    """
    hull = support_polygon(state)
    return signed_distance_to_polygon(state.body_pos[:2], hull)


# --------------------------------------------------------------------------
# collision geometry


def _link_sample_ts(length):
    n = max(2, int(math.ceil(length / CAPSULE_SAMPLE_STEP)) + 1)
    return np.linspace(0.0, 1.0, n)


def _model_sampling(model: RobotModel):
    """Cached capsule sampling tables for a robot template."""
    cache = model._caches
    if "sampling" in cache:
        return cache["sampling"]
    lc, lf, lt = model.link_lengths
    link_ts = [_link_sample_ts(l) for l in (lc, lf, lt)]
    body_pts = []
    body_radii = []
    for p0, p1, r in model.body_capsules:
        ts = _link_sample_ts(float(np.linalg.norm(p1 - p0)))
        body_pts.append(p0[None, :] * (1 - ts[:, None]) + p1[None, :] * ts[:, None])
        body_radii.append(np.full(ts.size, r))
    body_pts = np.concatenate(body_pts) if body_pts else np.zeros((0, 3))
    body_radii = np.concatenate(body_radii) if body_radii else np.zeros(0)

    # self-collision pair indices over the capsule list
    # [body capsules..., then (leg, link) in row-major order]
    nb = len(model.body_capsules)
    L = model.leg_count

    def cap_index(leg, link):
        return nb + leg * 3 + link

    pairs = []
    for i in range(L):
        for j in range(i + 1, L):
            for li in range(3):
                for lj in range(3):
                    pairs.append((cap_index(i, li), cap_index(j, lj)))
    for b in range(nb):
        for leg in range(L):
            # Coxa and femur are adjacent to the body through the hip; only
            # the tibia can genuinely strike it.
            pairs.append((b, cap_index(leg, 2)))
    pairs = np.array(pairs, dtype=int)
    tables = {
        "link_ts": link_ts,
        "body_pts": body_pts,
        "body_radii": body_radii,
        "pairs": pairs,
        "n_body_caps": nb,
    }
    cache["sampling"] = tables
    return tables


def _chain_points_world(model: RobotModel, state: FullBodyState):
    """Hip/coxa/knee/foot world points for every leg, shape (4, L, 3)."""
    coxa, knee, foot = rb._hip_frame_chain(model, state.joint_angles)
    c = np.cos(model.hip_yaws)
    s = np.sin(model.hip_yaws)

    def to_body(p):
        x = p[..., 0] * c - p[..., 1] * s
        y = p[..., 0] * s + p[..., 1] * c
        return np.stack([x, y, p[..., 2]], axis=-1) + model.hip_positions

    hips = np.broadcast_to(model.hip_positions, coxa.shape)
    chain_body = np.stack([hips, to_body(coxa), to_body(knee), to_body(foot)])
    R = quat_to_matrix(state.body_quat)
    return state.body_pos + chain_body @ R.T


def _terrain_collision_free(model, emap, state, chain_world):
    tables = _model_sampling(model)
    pts = []
    radii = []
    exempt = []
    # body capsules
    if tables["body_pts"].size:
        R = quat_to_matrix(state.body_quat)
        pw = state.body_pos + tables["body_pts"] @ R.T
        pts.append(pw)
        radii.append(tables["body_radii"])
        exempt.append(np.zeros(pw.shape[0], dtype=bool))
    # feet may rest on the surface but must not penetrate it
    feet = chain_world[3]
    foot_h = heights_at(emap, feet[:, :2])
    if np.any(feet[:, 2] - foot_h < -CONTACT_TOLERANCE):
        return False
    exempt_radius = max(FOOT_EXEMPT_RADIUS, 3.0 * model.leg_capsule_radii[2])
    for link in range(3):
        ts = tables["link_ts"][link]
        a = chain_world[link]  # (L, 3)
        b = chain_world[link + 1]
        pw = a[:, None, :] * (1 - ts[None, :, None]) + b[:, None, :] * ts[None, :, None]
        pw = pw.reshape(-1, 3)
        pts.append(pw)
        radii.append(np.full(pw.shape[0], model.leg_capsule_radii[link]))
        if link == 2:
            dist_to_foot = np.linalg.norm(
                pw - np.repeat(feet, ts.size, axis=0), axis=1
            )
            ex = dist_to_foot <= exempt_radius
        else:
            ex = np.zeros(pw.shape[0], dtype=bool)
        exempt.append(ex)
    pts = np.concatenate(pts)
    radii = np.concatenate(radii)
    exempt = np.concatenate(exempt)
    ground = heights_at(emap, pts[:, :2])
    clear = pts[:, 2] - radii - ground >= TERRAIN_CLEARANCE
    return bool(np.all(clear | exempt))


def _self_collision_free(model, state, chain_world):
    tables = _model_sampling(model)
    nb = tables["n_body_caps"]
    L = model.leg_count
    n_caps = nb + 3 * L
    seg_a = np.empty((n_caps, 3))
    seg_b = np.empty((n_caps, 3))
    rad = np.empty(n_caps)
    R = quat_to_matrix(state.body_quat)
    for i, (p0, p1, r) in enumerate(model.body_capsules):
        seg_a[i] = state.body_pos + R @ p0
        seg_b[i] = state.body_pos + R @ p1
        rad[i] = r
    for link in range(3):
        idx = nb + np.arange(L) * 3 + link
        seg_a[idx] = chain_world[link]
        seg_b[idx] = chain_world[link + 1]
        rad[idx] = model.leg_capsule_radii[link]
    pa, pb = tables["pairs"][:, 0], tables["pairs"][:, 1]
    d = segment_segment_distance(seg_a[pa], seg_b[pa], seg_a[pb], seg_b[pb])
    return bool(np.all(d > rad[pa] + rad[pb]))


# --------------------------------------------------------------------------
# state and segment checks


def check_state(
    model: RobotModel,
    emap: ElevationMap,
    state: FullBodyState,
    counter: CheckCounter | None = None,
) -> ConstraintReport:
    """Full constraint report: workspace, collisions, static stability."""
    if counter is not None:
        counter.n += 1
    if not emap.contains(state.body_pos[:2]):
        raise OutOfBounds("body position outside map extent")
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    in_workspace = bool(np.all((state.joint_angles >= lo) & (state.joint_angles <= hi)))

    chain_world = _chain_points_world(model, state)
    collision_free = _terrain_collision_free(model, emap, state, chain_world) and \
        _self_collision_free(model, state, chain_world)

    if np.any(state.stance):
        s_margin = stability_margin(state)
        k_margin = rb.kinematic_margin(model, state)
    else:
        s_margin = -math.inf
        k_margin = 0.0
    return ConstraintReport(
        in_workspace=in_workspace,
        collision_free=collision_free,
        stable=s_margin > STABILITY_THRESHOLD,
        stability_margin=float(s_margin),
        kinematic_margin=float(k_margin),
    )


def interpolate_states(model, a: FullBodyState, b: FullBodyState, fractions):
    """Contact-preserving interpolation between two states.

    The body pose blends linearly (slerp for orientation).  Feet of legs in
    stance at both ends glide along straight world-space lines — so a foot
    shared by both states stays planted — with joints re-solved by IK.
    Swing legs and IK failures fall back to joint-space interpolation.
    """
    out = []
    stance = a.stance & b.stance
    for t in fractions:
        pos = (1 - t) * a.body_pos + t * b.body_pos
        quat = quat_slerp(a.body_quat, b.body_quat, t)
        joints = (1 - t) * a.joint_angles + t * b.joint_angles
        if np.any(stance):
            feet = (1 - t) * a.foot_world + t * b.foot_world
            R = quat_to_matrix(quat)
            angles, ok = rb.leg_ik_all(model, (feet - pos) @ R)
            keep = stance & ok
            joints = np.where(keep[:, None], angles, joints)
        out.append(make_state(model, pos, quat, joints, stance))
    return out


def check_segment(
    model: RobotModel,
    emap: ElevationMap,
    a: FullBodyState,
    b: FullBodyState,
    step: float = SEGMENT_STEP,
    counter: CheckCounter | None = None,
) -> SegmentResult:
    """Validate the interpolated motion from ``a`` to ``b``.

    States are checked at body arc-length spacing <= ``step`` including
    both endpoints; the result carries the first failing sample.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    dist = float(np.linalg.norm(b.body_pos - a.body_pos))
    n = max(1, int(math.ceil(dist / step)))
    fractions = np.linspace(0.0, 1.0, n + 1)
    for i, state in enumerate(interpolate_states(model, a, b, fractions)):
        report = check_state(model, emap, state, counter=counter)
        if not report.valid:
            return SegmentResult(False, i, float(fractions[i]), report)
    return SegmentResult(True)
