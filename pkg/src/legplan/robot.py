"""Robot templates, analytic 3-DoF leg kinematics, and kinematic margin."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import LimitViolation, NoStanceLegs, Unreachable
from .geometry import quat_normalize, quat_to_matrix

#: Voxel size of the precomputed workspace boundary shell [m].
SHELL_RESOLUTION = 0.004


@dataclass(frozen=True)
class RobotModel:
    """Kinematic template of a statically walking robot.

    Legs are identical serial chains (coxa yaw about z, femur and tibia
    pitch) mounted at ``hip_positions`` with outward yaw ``hip_yaws``.
    """

    name: str
    leg_count: int
    hip_positions: np.ndarray  # (L, 3) body frame
    hip_yaws: np.ndarray  # (L,)
    link_lengths: np.ndarray  # (coxa, femur, tibia)
    joint_limits: np.ndarray  # (3, 2)
    body_capsules: tuple  # ((p0, p1, radius), ...) body frame
    leg_capsule_radii: np.ndarray  # (3,) per link
    nominal_stance: np.ndarray  # (L, 3) body frame
    standing_height: float
    max_step: float
    climb_limit: float
    gait_groups: tuple  # swing groups in schedule order

    def __post_init__(self):
        for name in ("hip_positions", "hip_yaws", "link_lengths", "joint_limits",
                     "leg_capsule_radii", "nominal_stance"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        assert np.all(self.link_lengths > 0)
        assert np.all(self.joint_limits[:, 0] < self.joint_limits[:, 1])
        object.__setattr__(self, "_caches", {})

    @property
    def dof(self):
        return 6 + 3 * self.leg_count

    @property
    def reach(self):
        return float(self.link_lengths.sum())


@dataclass(frozen=True)
class FullBodyState:
    """Body SE3 pose plus per-leg joint angles and stance flags."""

    body_pos: np.ndarray  # (3,)
    body_quat: np.ndarray  # (w, x, y, z), unit
    joint_angles: np.ndarray  # (L, 3)
    stance: np.ndarray  # (L,) bool
    foot_world: np.ndarray  # (L, 3) derived cache

    def __post_init__(self):
        object.__setattr__(self, "body_pos", np.asarray(self.body_pos, dtype=float).reshape(3))
        object.__setattr__(self, "body_quat", quat_normalize(self.body_quat))
        object.__setattr__(self, "joint_angles", np.asarray(self.joint_angles, dtype=float))
        object.__setattr__(self, "stance", np.asarray(self.stance, dtype=bool).reshape(-1))
        object.__setattr__(self, "foot_world", np.asarray(self.foot_world, dtype=float))

    @property
    def xy(self):
        return self.body_pos[:2]


def make_state(model: RobotModel, body_pos, body_quat, joint_angles, stance) -> FullBodyState:
    """Build a state, deriving the world foot positions from FK."""
    body_pos = np.asarray(body_pos, dtype=float).reshape(3)
    body_quat = quat_normalize(body_quat)
    joint_angles = np.asarray(joint_angles, dtype=float).reshape(model.leg_count, 3)
    feet_body = leg_fk_all(model, joint_angles)
    R = quat_to_matrix(body_quat)
    foot_world = body_pos + feet_body @ R.T
    return FullBodyState(body_pos, body_quat, joint_angles, np.asarray(stance, dtype=bool), foot_world)


# --------------------------------------------------------------------------
# forward kinematics


def _hip_frame_chain(model: RobotModel, angles):
    """Joint points in the hip frame for angle array (..., 3).

    Returns coxa end, femur end (knee), foot; the hip itself is the origin.
    """
    lc, lf, lt = model.link_lengths
    q1 = angles[..., 0]
    q2 = angles[..., 1]
    q3 = angles[..., 2]
    c1, s1 = np.cos(q1), np.sin(q1)
    u_coxa = lc
    u_knee = lc + lf * np.cos(q2)
    z_knee = lf * np.sin(q2)
    u_foot = u_knee + lt * np.cos(q2 + q3)
    z_foot = z_knee + lt * np.sin(q2 + q3)
    coxa = np.stack([u_coxa * c1, u_coxa * s1, np.zeros_like(q1)], axis=-1)
    knee = np.stack([u_knee * c1, u_knee * s1, z_knee], axis=-1)
    foot = np.stack([u_foot * c1, u_foot * s1, z_foot], axis=-1)
    return coxa, knee, foot


def _hip_to_body(model: RobotModel, leg: int, pts):
    yaw = model.hip_yaws[leg]
    c, s = math.cos(yaw), math.sin(yaw)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return model.hip_positions[leg] + pts @ R.T


def _body_to_hip(model: RobotModel, leg: int, pts):
    yaw = model.hip_yaws[leg]
    c, s = math.cos(yaw), math.sin(yaw)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return (np.asarray(pts, dtype=float) - model.hip_positions[leg]) @ R


def leg_fk(model: RobotModel, leg: int, angles) -> np.ndarray:
    """Foot position in the body frame for one leg."""
    angles = np.asarray(angles, dtype=float)
    _, _, foot = _hip_frame_chain(model, angles)
    return _hip_to_body(model, leg, foot)


def leg_chain_points(model: RobotModel, leg: int, angles):
    """Hip, coxa end, knee, and foot in the body frame (capsule endpoints)."""
    angles = np.asarray(angles, dtype=float)
    coxa, knee, foot = _hip_frame_chain(model, angles)
    pts = np.stack([np.zeros(3), coxa, knee, foot], axis=0)
    return _hip_to_body(model, leg, pts)


def leg_fk_all(model: RobotModel, joint_angles) -> np.ndarray:
    """Feet in the body frame for all legs; ``joint_angles`` is (..., L, 3)."""
    joint_angles = np.asarray(joint_angles, dtype=float)
    _, _, foot = _hip_frame_chain(model, joint_angles)
    c = np.cos(model.hip_yaws)
    s = np.sin(model.hip_yaws)
    x = foot[..., 0] * c - foot[..., 1] * s
    y = foot[..., 0] * s + foot[..., 1] * c
    out = np.stack([x, y, foot[..., 2]], axis=-1)
    return out + model.hip_positions


# --------------------------------------------------------------------------
# inverse kinematics


def _ik_planar(model: RobotModel, r, z):
    """Two-link planar IK with the knee-bent-one-way (s3 <= 0) branch."""
    _, lf, lt = model.link_lengths
    d2 = r * r + z * z
    c3 = (d2 - lf * lf - lt * lt) / (2.0 * lf * lt)
    reachable = np.abs(c3) <= 1.0
    c3c = np.clip(c3, -1.0, 1.0)
    s3 = -np.sqrt(np.maximum(1.0 - c3c * c3c, 0.0))
    q3 = np.arctan2(s3, c3c)
    q2 = np.arctan2(z, r) - np.arctan2(lt * s3, lf + lt * c3c)
    q2 = (q2 + np.pi) % (2.0 * np.pi) - np.pi  # canonical branch in (-pi, pi]
    return q2, q3, reachable


def _ik_hip_frame(model: RobotModel, target):
    """Vectorised IK in the hip frame, knee-bend convention fixed.

    Both yaw branches (foot in front of or behind the coxa axis) are tried;
    the coxa limit range spans less than pi, so at most one branch can be
    within limits and the in-limit solution is unique.

    ``target`` is (..., 3).  Returns (angles, reachable, within_limits);
    ``within_limits`` implies ``reachable`` for the returned branch.
    """
    lc, _, _ = model.link_lengths
    target = np.asarray(target, dtype=float)
    x, y, z = target[..., 0], target[..., 1], target[..., 2]
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]

    q1a = np.arctan2(y, x)
    rho = np.hypot(x, y)
    q2a, q3a, reach_a = _ik_planar(model, rho - lc, z)
    ang_a = np.stack([q1a, q2a, q3a], axis=-1)
    ok_a = reach_a & np.all((ang_a >= lo) & (ang_a <= hi), axis=-1)

    q1b = np.where(q1a > 0, q1a - np.pi, q1a + np.pi)
    q2b, q3b, reach_b = _ik_planar(model, -rho - lc, z)
    ang_b = np.stack([q1b, q2b, q3b], axis=-1)
    ok_b = reach_b & np.all((ang_b >= lo) & (ang_b <= hi), axis=-1)

    use_b = ~ok_a & ok_b
    angles = np.where(use_b[..., None], ang_b, ang_a)
    return angles, reach_a | reach_b, ok_a | ok_b


def leg_ik(model: RobotModel, leg: int, foot) -> np.ndarray:
    """Joint angles reaching ``foot`` (body frame), knee-backward branch.

    Raises :class:`Unreachable` outside the annular workspace and
    :class:`LimitViolation` when the branch solution breaks a joint limit.
    """
    target = _body_to_hip(model, leg, np.asarray(foot, dtype=float).reshape(3))
    angles, reachable, within = _ik_hip_frame(model, target)
    if not bool(reachable):
        raise Unreachable(f"foot {tuple(foot)} outside leg {leg} workspace")
    if not bool(within):
        raise LimitViolation(f"foot {tuple(foot)} requires angles outside limits")
    return angles


def leg_ik_all(model: RobotModel, feet_body):
    """IK for all legs at once; ``feet_body`` is (..., L, 3).

    Returns (angles, ok) where ok combines reachability and limits.
    """
    feet_body = np.asarray(feet_body, dtype=float)
    rel = feet_body - model.hip_positions
    c = np.cos(model.hip_yaws)
    s = np.sin(model.hip_yaws)
    x = rel[..., 0] * c + rel[..., 1] * s
    y = -rel[..., 0] * s + rel[..., 1] * c
    hip_frame = np.stack([x, y, rel[..., 2]], axis=-1)
    angles, reachable, within = _ik_hip_frame(model, hip_frame)
    return angles, reachable & within


def workspace_contains(model: RobotModel, leg: int, foot) -> bool:
    """True iff IK succeeds with every joint limit satisfied."""
    target = _body_to_hip(model, leg, np.asarray(foot, dtype=float).reshape(3))
    _, reachable, within = _ik_hip_frame(model, target)
    return bool(reachable and within)


# --------------------------------------------------------------------------
# workspace boundary shell and kinematic margin


class _WorkspaceShell:
    """Voxelised distance field of the reachable-and-within-limits set.

    Stores, on a hip-frame grid, the Euclidean distance from each member
    voxel to the nearest non-member voxel; queried by trilinear
    interpolation.
    """

    def __init__(self, model: RobotModel, resolution=SHELL_RESOLUTION):
        r = model.reach + 2 * resolution
        axis = np.arange(-r, r + resolution / 2, resolution)
        n = axis.size
        member = np.zeros((n, n, n), dtype=bool)
        xs, ys = np.meshgrid(axis, axis, indexing="ij")
        flat_xy = np.stack([xs.ravel(), ys.ravel()], axis=-1)
        for k, z in enumerate(axis):
            tgt = np.concatenate([flat_xy, np.full((flat_xy.shape[0], 1), z)], axis=1)
            _, reach, within = _ik_hip_frame(model, tgt)
            member[:, :, k] = (reach & within).reshape(n, n)
        self.field = ndimage.distance_transform_edt(
            member, sampling=resolution
        ).astype(np.float32)
        self.origin = float(axis[0])
        self.resolution = resolution

    def distances(self, points):
        """Boundary distances for an (N, 3) hip-frame point array."""
        coords = (np.asarray(points, dtype=float) - self.origin) / self.resolution
        return ndimage.map_coordinates(
            self.field, coords.T, order=1, mode="constant", cval=0.0
        )


def _workspace_shell(model: RobotModel) -> _WorkspaceShell:
    if "shell" not in model._caches:
        model._caches["shell"] = _WorkspaceShell(model)
    return model._caches["shell"]


def leg_margin(model: RobotModel, leg: int, foot_body) -> float:
    """Distance from a body-frame foot point to its workspace boundary.

    Zero when the foot lies on or outside the boundary.
    """
    if not workspace_contains(model, leg, foot_body):
        return 0.0
    target = _body_to_hip(model, leg, np.asarray(foot_body, dtype=float).reshape(3))
    return float(_workspace_shell(model).distances(target[None, :])[0])


def leg_margin_batch(model: RobotModel, feet_body) -> np.ndarray:
    """Vectorised margin for (..., L, 3) body-frame feet."""
    feet_body = np.asarray(feet_body, dtype=float)
    rel = feet_body - model.hip_positions
    c = np.cos(model.hip_yaws)
    s = np.sin(model.hip_yaws)
    x = rel[..., 0] * c + rel[..., 1] * s
    y = -rel[..., 0] * s + rel[..., 1] * c
    hip_frame = np.stack([x, y, rel[..., 2]], axis=-1)
    _, reachable, within = _ik_hip_frame(model, hip_frame)
    inside = (reachable & within).ravel()
    flat = hip_frame.reshape(-1, 3)
    d = np.zeros(flat.shape[0])
    if np.any(inside):
        d[inside] = _workspace_shell(model).distances(flat[inside])
    return d.reshape(hip_frame.shape[:-1])


def kinematic_margin(model: RobotModel, state: FullBodyState) -> float:
    """Minimum stance-leg distance to the workspace boundary (body frame)."""
    if not np.any(state.stance):
        raise NoStanceLegs("kinematic margin needs at least one stance leg")
    R = quat_to_matrix(state.body_quat)
    feet_body = (state.foot_world - state.body_pos) @ R
    margins = leg_margin_batch(model, feet_body)
    return float(margins[state.stance].min())


# --------------------------------------------------------------------------
# templates


@functools.lru_cache(maxsize=None)
def hexapod() -> RobotModel:
    """Six-legged template (24 DoF), loosely Messor II scale."""
    angles = np.deg2rad([30.0, 90.0, 150.0, 210.0, 270.0, 330.0])
    circumradius = 0.15
    hips = np.stack(
        [circumradius * np.cos(angles), circumradius * np.sin(angles), np.zeros(6)],
        axis=-1,
    )
    standing = 0.18
    stance_radius = 0.18
    nominal = np.stack(
        [
            (circumradius + stance_radius) * np.cos(angles),
            (circumradius + stance_radius) * np.sin(angles),
            np.full(6, -standing),
        ],
        axis=-1,
    )
    body_caps = tuple(
        (
            np.array([-0.15 * math.cos(a), -0.15 * math.sin(a), 0.0]),
            np.array([0.15 * math.cos(a), 0.15 * math.sin(a), 0.0]),
            0.04,
        )
        for a in np.deg2rad([30.0, 90.0, 150.0])
    )
    return RobotModel(
        name="hexapod",
        leg_count=6,
        hip_positions=hips,
        hip_yaws=angles,
        link_lengths=np.array([0.055, 0.16, 0.26]),
        joint_limits=np.array([[-0.8, 0.8], [-1.2, 1.2], [-2.6, -0.35]]),
        body_capsules=body_caps,
        leg_capsule_radii=np.array([0.012, 0.015, 0.012]),
        nominal_stance=nominal,
        standing_height=standing,
        max_step=0.25,
        climb_limit=0.15,
        gait_groups=((0, 2, 4), (1, 3, 5)),
    )


@functools.lru_cache(maxsize=None)
def quadruped() -> RobotModel:
    """Four-legged template (18 DoF), loosely ANYmal scale.

    Leg order: LF, RF, LH, RH.  Crawl swings one leg at a time in the
    order LF, RH, RF, LH.
    """
    hips = np.array(
        [
            [0.275, 0.125, 0.0],
            [0.275, -0.125, 0.0],
            [-0.275, 0.125, 0.0],
            [-0.275, -0.125, 0.0],
        ]
    )
    yaws = np.array([math.pi / 2, -math.pi / 2, math.pi / 2, -math.pi / 2])
    # Keep the posture search well inside the ~0.60 m leg extension so
    # trailing stance feet retain reach during the crawl cycle.
    standing = 0.35
    lateral = 0.18
    nominal = hips + np.array(
        [
            [0.0, lateral, -standing],
            [0.0, -lateral, -standing],
            [0.0, lateral, -standing],
            [0.0, -lateral, -standing],
        ]
    )
    body_caps = (
        (np.array([-0.21, 0.0, 0.0]), np.array([0.21, 0.0, 0.0]), 0.125),
    )
    return RobotModel(
        name="quadruped",
        leg_count=4,
        hip_positions=hips,
        hip_yaws=yaws,
        link_lengths=np.array([0.10, 0.28, 0.33]),
        joint_limits=np.array([[-1.0, 1.0], [-2.2, 1.0], [-2.7, -0.35]]),
        body_capsules=body_caps,
        leg_capsule_radii=np.array([0.025, 0.025, 0.02]),
        nominal_stance=nominal,
        standing_height=standing,
        max_step=0.35,
        climb_limit=0.25,
        gait_groups=((0,), (3,), (1,), (2,)),
    )


def make_robot(name: str) -> RobotModel:
    if name == "hexapod":
        return hexapod()
    if name == "quadruped":
        return quadruped()
    raise ValueError(f"unknown robot template {name!r}")
