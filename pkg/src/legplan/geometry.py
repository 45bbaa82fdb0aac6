"""Small geometric helpers: quaternions, hulls, segment distances.

Quaternions are stored as (w, x, y, z) numpy arrays with unit norm.
"""

from __future__ import annotations

import numpy as np

# --------------------------------------------------------------------------
# quaternions


def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_rpy(roll, pitch, yaw):
    """Intrinsic z-y-x (yaw, then pitch, then roll) Euler convention."""
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    return np.array(
        [
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        ]
    )


def quat_yaw(q):
    """Yaw (rotation of the body x axis projected on the ground plane)."""
    m = quat_to_matrix(q)
    return float(np.arctan2(m[1, 0], m[0, 0]))


def quat_rotate(q, v):
    return quat_to_matrix(q) @ np.asarray(v, dtype=float)


def quat_slerp(a, b, t):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + t * (b - a))
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    s = np.sin(theta)
    return quat_normalize(
        (np.sin((1.0 - t) * theta) / s) * a + (np.sin(t * theta) / s) * b
    )


def quat_log(q):
    """Rotation-vector logarithm of a unit quaternion."""
    w = np.clip(q[0], -1.0, 1.0)
    v = np.asarray(q[1:], dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(n, w)
    if angle > np.pi:
        angle -= 2.0 * np.pi
    return (angle / n) * v


def quat_exp(v):
    """Inverse of :func:`quat_log`."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return quat_normalize(np.array([1.0, *(0.5 * v)]))
    axis = v / angle
    return np.array([np.cos(angle / 2.0), *(np.sin(angle / 2.0) * axis)])


# --------------------------------------------------------------------------
# 2D hulls and polygon distances


def convex_hull_2d(points):
    """Monotone-chain convex hull; returns CCW vertices without repetition."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return [np.array(p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # all collinear
        return [np.array(pts[0]), np.array(pts[-1])]
    return [np.array(p) for p in hull]


def polygon_area(vertices):
    """Shoelace area of a CCW polygon."""
    a = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


def point_segment_distance_2d(p, a, b):
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    t = np.clip(np.dot(p - a, ab) / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def signed_distance_to_polygon(p, vertices):
    """Signed distance from point to convex polygon boundary.

    Positive inside, negative outside.  Degenerate hulls (< 3 vertices)
    always give a non-positive value.
    """
    p = np.asarray(p, dtype=float)
    if len(vertices) < 3:
        if not vertices:
            return -np.inf
        if len(vertices) == 1:
            return -float(np.linalg.norm(p - vertices[0]))
        return -point_segment_distance_2d(p, vertices[0], vertices[1])
    d = min(
        point_segment_distance_2d(p, vertices[i], vertices[(i + 1) % len(vertices)])
        for i in range(len(vertices))
    )
    inside = True
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cross < 0.0:  # vertices are CCW
            inside = False
            break
    return d if inside else -d


# --------------------------------------------------------------------------
# segment-segment distances (batched, for capsule pairs)


def segment_segment_distance(p0, p1, q0, q1):
    """Minimum distances between segment batches.

    All inputs have shape (N, 3); returns shape (N,).
    """
    p0 = np.atleast_2d(p0)
    p1 = np.atleast_2d(p1)
    q0 = np.atleast_2d(q0)
    q1 = np.atleast_2d(q1)
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b

    eps = 1e-14
    s = np.where(denom > eps, np.clip((b * f - c * e) / np.where(denom > eps, denom, 1.0), 0.0, 1.0), 0.0)
    # clamp t, then re-clamp s (standard Ericson closest-point scheme)
    t = np.where(e > eps, (b * s + f) / np.where(e > eps, e, 1.0), 0.0)
    t_clamped = np.clip(t, 0.0, 1.0)
    need = t != t_clamped
    s = np.where(need & (a > eps), np.clip((b * t_clamped - c) / np.where(a > eps, a, 1.0), 0.0, 1.0), s)
    t = t_clamped

    cp = p0 + s[:, None] * d1
    cq = q0 + t[:, None] * d2
    return np.linalg.norm(cp - cq, axis=1)
