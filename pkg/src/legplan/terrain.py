"""Elevation-map world model: queries, scenario generation, and map I/O."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, OutOfBounds, ParseError

#: Grid resolution used by all generated scenarios [m/cell].
RESOLUTION = 0.02
#: Side length of the generated square maps [m].
EXTENT = 6.0
#: Start -> goal displacement of every scenario [m].
GOAL_DISTANCE = 4.6

SCENARIO_KINDS = ("flat", "rough", "box", "bug_trap")


@dataclass(frozen=True)
class ElevationMap:
    """Regular grid of terrain heights.

    ``heights`` has shape (height, width); cell (ix, iy) is centred at
    ``origin + (ix, iy) * resolution``.  Immutable after construction.
    """

    width: int
    height: int
    resolution: float
    origin: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0:
            raise InvalidSpec("resolution must be positive")
        if self.width < 2 or self.height < 2:
            raise InvalidSpec("map must be at least 2x2 cells")
        h = np.asarray(self.heights, dtype=float).reshape(self.height, self.width)
        if not np.all(np.isfinite(h)):
            raise InvalidSpec("all heights must be finite")
        h = np.ascontiguousarray(h)
        h.flags.writeable = False
        o = np.asarray(self.origin, dtype=float).reshape(2).copy()
        o.flags.writeable = False
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "_caches", {})

    # -- extent ------------------------------------------------------------
    @property
    def x_max(self):
        return float(self.origin[0] + (self.width - 1) * self.resolution)

    @property
    def y_max(self):
        return float(self.origin[1] + (self.height - 1) * self.resolution)

    def contains(self, p, margin=0.0):
        x, y = float(p[0]), float(p[1])
        eps = 1e-9
        return (
            self.origin[0] + margin - eps <= x <= self.x_max - margin + eps
            and self.origin[1] + margin - eps <= y <= self.y_max - margin + eps
        )

    def cell_center(self, ix, iy):
        return self.origin + np.array([ix, iy]) * self.resolution

    def max_height(self):
        return float(self.heights.max())


def height_at(emap: ElevationMap, p) -> float:
    """Bilinear interpolation of the four surrounding cell heights."""
    if not emap.contains(p):
        raise OutOfBounds(f"point {tuple(p)} outside map extent")
    return float(heights_at(emap, np.asarray(p, dtype=float)[None, :])[0])


def heights_at(emap: ElevationMap, pts) -> np.ndarray:
    """Vectorised :func:`height_at` without bounds checking (clamps to edge)."""
    pts = np.asarray(pts, dtype=float)
    fx = (pts[:, 0] - emap.origin[0]) / emap.resolution
    fy = (pts[:, 1] - emap.origin[1]) / emap.resolution
    ix = np.clip(np.floor(fx).astype(int), 0, emap.width - 2)
    iy = np.clip(np.floor(fy).astype(int), 0, emap.height - 2)
    tx = np.clip(fx - ix, 0.0, 1.0)
    ty = np.clip(fy - iy, 0.0, 1.0)
    h = emap.heights
    h00 = h[iy, ix]
    h10 = h[iy, ix + 1]
    h01 = h[iy + 1, ix]
    h11 = h[iy + 1, ix + 1]
    return (
        h00 * (1 - tx) * (1 - ty)
        + h10 * tx * (1 - ty)
        + h01 * (1 - tx) * ty
        + h11 * tx * ty
    )


# --------------------------------------------------------------------------
# roughness


def roughness_at(emap: ElevationMap, p, radius: float):
    """Least-squares plane fit over the cells within ``radius`` of ``p``.

    Returns a dict with ``slope`` (radians) and ``height_variance`` (m^2,
    mean squared residual about the fitted plane).
    """
    if not emap.contains(p, margin=radius):
        raise OutOfBounds(f"disc of radius {radius} around {tuple(p)} leaves the map")
    x, y = float(p[0]), float(p[1])
    res = emap.resolution
    r_cells = int(math.floor(radius / res)) + 1
    cx = int(round((x - emap.origin[0]) / res))
    cy = int(round((y - emap.origin[1]) / res))
    ix0, ix1 = max(0, cx - r_cells), min(emap.width - 1, cx + r_cells)
    iy0, iy1 = max(0, cy - r_cells), min(emap.height - 1, cy + r_cells)
    ixs, iys = np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1))
    xs = emap.origin[0] + ixs.ravel() * res
    ys = emap.origin[1] + iys.ravel() * res
    mask = np.hypot(xs - x, ys - y) <= radius + 1e-9
    xs, ys = xs[mask], ys[mask]
    hs = emap.heights[iys.ravel()[mask], ixs.ravel()[mask]]
    if xs.size < 3:
        return {"slope": 0.0, "height_variance": 0.0}
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    A = np.column_stack([np.ones_like(dx), dx, dy])
    coef, *_ = np.linalg.lstsq(A, hs, rcond=None)
    resid = hs - A @ coef
    slope = math.atan(math.hypot(coef[1], coef[2]))
    return {"slope": slope, "height_variance": float(np.mean(resid**2))}


class RoughnessField:
    """Per-cell slope and height-variance grids for a fixed disc radius.

    Matches :func:`roughness_at` evaluated at cell centres (the disc stencil
    around a centre is point symmetric, so the plane-fit normal equations
    decouple).  Cells whose disc leaves the map hold NaN.
    """

    def __init__(self, emap: ElevationMap, radius: float):
        res = emap.resolution
        r_cells = int(math.floor(radius / res)) + 1
        offs = []
        for dj in range(-r_cells, r_cells + 1):
            for di in range(-r_cells, r_cells + 1):
                if math.hypot(di, dj) * res <= radius + 1e-9:
                    offs.append((di, dj))
        self.margin = max(max(abs(di), abs(dj)) for di, dj in offs)
        m = self.margin
        h = emap.heights
        ny, nx = h.shape
        core = (slice(m, ny - m), slice(m, nx - m))
        n = len(offs)
        s_h = np.zeros((ny - 2 * m, nx - 2 * m))
        s_h2 = np.zeros_like(s_h)
        s_xh = np.zeros_like(s_h)
        s_yh = np.zeros_like(s_h)
        s_x2 = 0.0
        s_y2 = 0.0
        for di, dj in offs:
            block = h[m + dj : ny - m + dj, m + di : nx - m + di]
            s_h += block
            s_h2 += block * block
            s_xh += (di * res) * block
            s_yh += (dj * res) * block
            s_x2 += (di * res) ** 2
            s_y2 += (dj * res) ** 2
        mean = s_h / n
        a = s_xh / s_x2
        b = s_yh / s_y2
        var = s_h2 / n - mean**2 - a * a * (s_x2 / n) - b * b * (s_y2 / n)
        np.clip(var, 0.0, None, out=var)
        self.slope = np.full((ny, nx), np.nan)
        self.variance = np.full((ny, nx), np.nan)
        self.slope[core] = np.arctan(np.hypot(a, b))
        self.variance[core] = var
        self.emap = emap
        self.radius = radius


def roughness_field(emap: ElevationMap, radius: float) -> RoughnessField:
    """Cached :class:`RoughnessField` for this map and radius."""
    key = ("rough", round(radius, 9))
    cache = emap._caches
    if key not in cache:
        cache[key] = RoughnessField(emap, radius)
    return cache[key]


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    seed: int = 0
    extent: float = EXTENT
    entrance_width: float = 1.2
    obstacle_height: float = 0.5

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise InvalidSpec(f"unknown scenario kind {self.kind!r}")
        if self.extent <= 0:
            raise InvalidSpec("extent must be positive")
        if self.extent < GOAL_DISTANCE + 1.0:
            raise InvalidSpec(
                f"extent must be at least {GOAL_DISTANCE + 1.0} m to fit the start/goal"
            )
        if self.kind == "bug_trap" and self.entrance_width <= 0:
            raise InvalidSpec("entrance_width must be positive for bug_trap")
        if self.obstacle_height <= 0:
            raise InvalidSpec("obstacle_height must be positive")


def default_start_goal(extent: float = EXTENT):
    """Start and goal 2D positions used by every scenario (4.6 m apart)."""
    sx = (extent - GOAL_DISTANCE) / 2.0
    y = extent / 2.0
    return np.array([sx, y]), np.array([sx + GOAL_DISTANCE, y])


def _value_noise(rng, shape, res, extent):
    """Seeded multi-octave value noise: 3 octaves, lacunarity 2, persistence 0.5."""
    ny, nx = shape
    total = np.zeros(shape)
    spacing = extent / 4.0
    amp = 1.0
    for _ in range(3):
        n_ctrl_x = int(math.ceil(extent / spacing)) + 2
        n_ctrl_y = n_ctrl_x
        ctrl = rng.random((n_ctrl_y, n_ctrl_x))
        xs = np.arange(nx) * res / spacing
        ys = np.arange(ny) * res / spacing
        ix = np.floor(xs).astype(int)
        iy = np.floor(ys).astype(int)
        tx = xs - ix
        ty = ys - iy
        # smoothstep weights keep the surface C1
        tx = tx * tx * (3 - 2 * tx)
        ty = ty * ty * (3 - 2 * ty)
        c00 = ctrl[np.ix_(iy, ix)]
        c10 = ctrl[np.ix_(iy, ix + 1)]
        c01 = ctrl[np.ix_(iy + 1, ix)]
        c11 = ctrl[np.ix_(iy + 1, ix + 1)]
        layer = (
            c00 * np.outer(1 - ty, 1 - tx)
            + c10 * np.outer(1 - ty, tx)
            + c01 * np.outer(ty, 1 - tx)
            + c11 * np.outer(ty, tx)
        )
        total += amp * layer
        spacing /= 2.0
        amp *= 0.5
    return total


#: Peak height of the rough scenario [m]; taller than the hexapod template body.
ROUGH_PEAK = 0.35
#: Bug-trap geometry [m].
TRAP_WALL_THICKNESS = 0.1
TRAP_INTERIOR = 2.0
#: Box obstacle [m].
BOX_SIDE = 1.0


def generate_scenario(spec: ScenarioSpec) -> ElevationMap:
    """Deterministic elevation map for one of the four benchmark scenarios."""
    res = RESOLUTION
    n = int(round(spec.extent / res)) + 1
    heights = np.zeros((n, n))
    xs = np.arange(n) * res
    ys = np.arange(n) * res
    gx, gy = np.meshgrid(xs, ys)
    start, goal = default_start_goal(spec.extent)

    if spec.kind == "flat":
        pass
    elif spec.kind == "rough":
        rng = np.random.default_rng(np.uint64(spec.seed))
        noise = _value_noise(rng, (n, n), res, spec.extent)
        noise -= noise.min()
        heights = noise * (ROUGH_PEAK / noise.max())
    elif spec.kind == "box":
        cx = cy = spec.extent / 2.0
        inside = (np.abs(gx - cx) <= BOX_SIDE / 2.0) & (np.abs(gy - cy) <= BOX_SIDE / 2.0)
        heights[inside] = spec.obstacle_height
    elif spec.kind == "bug_trap":
        # interior 2 m x 2 m around the start; full front, rear and lower
        # walls, the opening sits in the upper wall so the exit corridor
        # stays well inside the map extent (the start is only 0.7 m from
        # the left border).  A straight start-goal line hits the front wall.
        sx, sy = start
        x_back = sx - TRAP_INTERIOR / 4.0
        x_front = x_back + TRAP_INTERIOR
        x_mid = 0.5 * (x_back + x_front)
        t = TRAP_WALL_THICKNESS
        half = TRAP_INTERIOR / 2.0
        walls = np.zeros((n, n), dtype=bool)
        # front wall (towards the goal)
        walls |= (
            (gx >= x_front)
            & (gx <= x_front + t)
            & (np.abs(gy - sy) <= half + t)
        )
        # rear wall
        walls |= (
            (gx >= x_back - t)
            & (gx <= x_back)
            & (np.abs(gy - sy) <= half + t)
        )
        # lower side wall
        walls |= (
            (gx >= x_back - t)
            & (gx <= x_front + t)
            & (gy >= sy - half - t)
            & (gy <= sy - half)
        )
        # upper side wall: two stubs leaving a centred opening
        walls |= (
            (gx >= x_back - t)
            & (gx <= x_front + t)
            & (np.abs(gx - x_mid) >= spec.entrance_width / 2.0)
            & (gy >= sy + half)
            & (gy <= sy + half + t)
        )
        heights[walls] = spec.obstacle_height
    return ElevationMap(width=n, height=n, resolution=res, origin=np.zeros(2), heights=heights)


# --------------------------------------------------------------------------
# map I/O


def save_map(emap: ElevationMap) -> bytes:
    """Serialise to the ELEVMAP 1 text format with full float precision."""
    buf = io.StringIO()
    buf.write("ELEVMAP 1\n")
    buf.write(
        "width %d height %d resolution %s origin %s %s\n"
        % (
            emap.width,
            emap.height,
            repr(float(emap.resolution)),
            repr(float(emap.origin[0])),
            repr(float(emap.origin[1])),
        )
    )
    for row in emap.heights:
        buf.write(" ".join(repr(float(v)) for v in row))
        buf.write("\n")
    return buf.getvalue().encode()


def load_map(data: bytes) -> ElevationMap:
    """Parse the ELEVMAP 1 text format; inverse of :func:`save_map`."""
    lines = data.decode().splitlines()
    if not lines or lines[0].strip() != "ELEVMAP 1":
        raise ParseError("expected 'ELEVMAP 1' magic", line=1)
    if len(lines) < 2:
        raise ParseError("missing header line", line=2)
    tok = lines[1].split()
    if (
        len(tok) != 9
        or tok[0] != "width"
        or tok[2] != "height"
        or tok[4] != "resolution"
        or tok[6] != "origin"
    ):
        raise ParseError("header must be 'width W height H resolution R origin X Y'", line=2)
    try:
        width = int(tok[1])
        height = int(tok[3])
        resolution = float(tok[5])
        origin = np.array([float(tok[7]), float(tok[8])])
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", line=2) from None
    if resolution <= 0:
        raise ParseError("resolution must be positive", line=2)
    if width < 2 or height < 2:
        raise ParseError("map must be at least 2x2", line=2)
    rows = []
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split()]
        except ValueError as exc:
            raise ParseError(f"bad height value: {exc}", line=i) from None
        if len(row) != width:
            raise ParseError(f"expected {width} values, found {len(row)}", line=i)
        rows.append(row)
    if len(rows) != height:
        raise ParseError(f"expected {height} rows, found {len(rows)}", line=len(lines))
    try:
        return ElevationMap(
            width=width,
            height=height,
            resolution=resolution,
            origin=origin,
            heights=np.array(rows),
        )
    except InvalidSpec as exc:
        raise ParseError(str(exc), line=2) from None
