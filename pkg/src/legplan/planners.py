"""Global planners: A* guide, RRT-Connect, GuidedRRT, RRT*-Connect with
bounded rewiring, informed ellipse sampling, and the combined IGRSC ladder.

Sampling is two-dimensional (horizontal body positions); full-body states
are realized by the local step planner.  All reported planning times are
deterministic: one constraint-state evaluation costs ``CHECK_COST``
virtual seconds, so identical inputs reproduce identical statistics.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from scipy import ndimage

from .constraints import CheckCounter, check_segment
from .errors import (
    DegenerateEllipse,
    EmptyPath,
    NoPath,
    PlanningError,
    Timeout,
)
from .local_planner import nominal_state, plan_step
from .robot import FullBodyState, RobotModel
from .terrain import ElevationMap, heights_at, roughness_field

#: Virtual seconds charged per constraint-state evaluation.
CHECK_COST = 0.01
#: Coarse guide-grid resolution [m].
GUIDE_RESOLUTION = 0.1
#: Footprint radius by which unclimbable guide cells are inflated [m];
#: covers the lateral foot spread so guide followers can always stand.
GUIDE_INFLATION = 0.4
#: Traversal-penalty weights of the guide grid (slope, height variance).
GUIDE_W_SLOPE = 5.0
GUIDE_W_VARIANCE = 100.0
#: Margin kept between 2D samples and the map border [m].
SAMPLE_MARGIN = 0.5
#: Cap on consecutive steps of one greedy extension / connection.
MAX_SEQUENCE_STEPS = 40
#: Virtual-seconds slice granted to each sub-problem inside GuidedRRT.
GUIDED_SLICE = 10.0
#: Acceptance radius of GuidedRRT's temporary goals [m].
WAYPOINT_TOLERANCE = 0.3


@dataclass(frozen=True)
class PlannerConfig:
    d_rrt: float = 1.0
    n_rewire: int = 3
    gamma: float = 6.0
    dim: int = 2
    opt_time: float = 10.0
    time_limit: float = 60.0
    rng_seed: int = 0
    goal_tolerance: float = 0.15

    def __post_init__(self):
        if min(self.d_rrt, self.gamma, self.opt_time, self.time_limit,
               self.goal_tolerance) <= 0 or self.dim < 1 or self.n_rewire < 1:
            raise ValueError("all PlannerConfig parameters must be positive")


@dataclass(frozen=True)
class FullBodyPath:
    states: tuple
    length: float
    plan_time: float
    node_count: int = 0
    improvements: tuple = ()


@dataclass(frozen=True)
class GuidePath:
    waypoints: np.ndarray  # (N, 2) coarse-cell centres
    total_cost: float
    blocked: np.ndarray | None = None  # inflated no-stand grid, [ix, iy]
    grid_res: float = GUIDE_RESOLUTION
    grid_origin: np.ndarray | None = None

    def clear_at(self, xy) -> bool:
        """True when ``xy`` lies outside the inflated no-stand cells."""
        if self.blocked is None:
            return True
        xy = np.asarray(xy, dtype=float)
        i = int(np.clip((xy[0] - self.grid_origin[0]) / self.grid_res,
                        0, self.blocked.shape[0] - 1))
        j = int(np.clip((xy[1] - self.grid_origin[1]) / self.grid_res,
                        0, self.blocked.shape[1] - 1))
        return not bool(self.blocked[i, j])

    @property
    def arc_lengths(self):
        d = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(d)])

    def point_at(self, s: float):
        arcs = self.arc_lengths
        s = float(np.clip(s, 0.0, arcs[-1]))
        i = int(np.searchsorted(arcs, s, side="right") - 1)
        if i >= len(arcs) - 1:
            return self.waypoints[-1].copy()
        t = (s - arcs[i]) / (arcs[i + 1] - arcs[i])
        return (1 - t) * self.waypoints[i] + t * self.waypoints[i + 1]

    def project(self, xy) -> float:
        """Arc length of the waypoint nearest to ``xy``."""
        i = int(np.argmin(np.linalg.norm(self.waypoints - np.asarray(xy), axis=1)))
        return float(self.arc_lengths[i])


def path_length(states) -> float:
    """Horizontal body-centre arc length of a state sequence."""
    if len(states) < 2:
        return 0.0
    xy = np.array([s.body_pos[:2] for s in states])
    return float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))


# --------------------------------------------------------------------------
# Eq. (1)-(2): rewiring radius


def gamma_lower_bound(d: int, mu_free: float) -> float:
    """Smallest admissible RRT* scale factor for dimension d."""
    if d < 1 or mu_free <= 0:
        raise ValueError("need d >= 1 and mu_free > 0")
    zeta = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)  # unit-ball volume
    return (2.0 * (1.0 + 1.0 / d)) ** (1.0 / d) * (mu_free / zeta) ** (1.0 / d)


def rewire_radius(n: int, d: int, gamma: float) -> float:
    """Neighbour-ball radius after n samples."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return gamma * (math.log(n) / n) ** (1.0 / d)


# --------------------------------------------------------------------------
# informed ellipse sampling


def informed_sample(start, goal, c_best: float, rng, bounds=None):
    """Uniform 2D sample from the ellipse with foci start/goal, axis c_best.

    ``bounds`` as (lo_xy, hi_xy) clips by rejection; after too many
    rejections the latest in-ellipse sample is returned clamped.
    """
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    c_min = float(np.linalg.norm(goal - start))
    if c_best < c_min - 1e-9:
        raise DegenerateEllipse(f"c_best {c_best} below focal distance {c_min}")
    c_best = max(c_best, c_min)
    centre = 0.5 * (start + goal)
    theta = math.atan2(goal[1] - start[1], goal[0] - start[0])
    ct, st = math.cos(theta), math.sin(theta)
    r1 = 0.5 * c_best
    r2 = 0.5 * math.sqrt(max(c_best * c_best - c_min * c_min, 0.0))
    for _ in range(256):
        # uniform unit disc
        a = rng.uniform(0.0, 2.0 * math.pi)
        r = math.sqrt(rng.uniform(0.0, 1.0))
        ex, ey = r1 * r * math.cos(a), r2 * r * math.sin(a)
        p = centre + np.array([ct * ex - st * ey, st * ex + ct * ey])
        if bounds is None or (np.all(p >= bounds[0]) and np.all(p <= bounds[1])):
            return p
    return np.clip(p, bounds[0], bounds[1])


# --------------------------------------------------------------------------
# A* guide on the coarse grid


def _coarse_grids(emap: ElevationMap, coarse_res: float, climb_limit: float):
    """(penalty, blocked) arrays over the coarse grid plus cell centres."""
    nx = int((emap.x_max - emap.origin[0]) / coarse_res)
    ny = int((emap.y_max - emap.origin[1]) / coarse_res)
    cx = emap.origin[0] + (np.arange(nx) + 0.5) * coarse_res
    cy = emap.origin[1] + (np.arange(ny) + 0.5) * coarse_res
    rough = roughness_field(emap, max(coarse_res / 2.0, 3.0 * emap.resolution))
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    # nearest fine cell of every coarse-cell centre
    fix = np.clip(
        np.rint((pts[:, 0] - emap.origin[0]) / emap.resolution).astype(int),
        0, emap.width - 1,
    )
    fiy = np.clip(
        np.rint((pts[:, 1] - emap.origin[1]) / emap.resolution).astype(int),
        0, emap.height - 1,
    )
    slope = np.nan_to_num(rough.slope[fiy, fix]).reshape(nx, ny)
    var = np.nan_to_num(rough.variance[fiy, fix]).reshape(nx, ny)
    penalty = GUIDE_W_SLOPE * slope + GUIDE_W_VARIANCE * var

    # coarse heights and the max 8-neighbour height difference
    h = heights_at(emap, pts).reshape(nx, ny)
    diff = np.zeros((nx, ny))
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            shifted = np.full((nx, ny), np.nan)
            xs = slice(max(dx, 0), nx + min(dx, 0))
            xd = slice(max(-dx, 0), nx + min(-dx, 0))
            ys = slice(max(dy, 0), ny + min(dy, 0))
            yd = slice(max(-dy, 0), ny + min(-dy, 0))
            shifted[xd, yd] = h[xs, ys]
            with np.errstate(invalid="ignore"):
                diff = np.fmax(diff, np.abs(h - shifted))
    blocked = diff > climb_limit
    return penalty, blocked, cx, cy


def _inflate(blocked, radius: float, coarse_res: float):
    """Dilate blocked cells by a disc of the given radius."""
    r = int(math.ceil(radius / coarse_res))
    if r < 1:
        return blocked
    ox, oy = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    disc = ox * ox + oy * oy <= r * r
    return ndimage.binary_dilation(blocked, structure=disc)


def _grid_search(penalty, blocked, start_idx, goal_idx, res, heuristic=True):
    """Optimal 8-connected path on a cost grid.

    Move cost = step distance x (1 + penalty of the target cell); with
    ``heuristic`` False this degenerates to Dijkstra.  Returns the cell
    index path and its cost, or (None, inf).
    """
    nx, ny = penalty.shape
    start_idx = tuple(start_idx)
    goal_idx = tuple(goal_idx)
    if blocked[start_idx] or blocked[goal_idx]:
        return None, math.inf
    gx, gy = goal_idx

    def h(ix, iy):
        if not heuristic:
            return 0.0
        return res * math.hypot(ix - gx, iy - gy)

    dist = {start_idx: 0.0}
    parent = {}
    heap = [(h(*start_idx), start_idx)]
    closed = set()
    moves = [
        (dx, dy, res * math.hypot(dx, dy))
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        if (dx, dy) != (0, 0)
    ]
    while heap:
        f, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal_idx:
            path = [cur]
            while cur in parent:
                cur = parent[cur]
                path.append(cur)
            return path[::-1], dist[goal_idx]
        closed.add(cur)
        cx, cy = cur
        for dx, dy, step in moves:
            ix, iy = cx + dx, cy + dy
            if not (0 <= ix < nx and 0 <= iy < ny) or blocked[ix, iy]:
                continue
            nxt = (ix, iy)
            nd = dist[cur] + step * (1.0 + penalty[ix, iy])
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                parent[nxt] = cur
                heapq.heappush(heap, (nd + h(ix, iy), nxt))
    return None, math.inf


def astar_guide(
    emap: ElevationMap,
    start,
    goal,
    coarse_res: float = GUIDE_RESOLUTION,
    climb_limit: float = 0.15,
) -> GuidePath:
    """Optimal coarse-grid guide path between two 2D positions."""
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    for p in (start, goal):
        if not emap.contains(p):
            raise NoPath(f"guide endpoint {p} outside the map")
    penalty, blocked, cx, cy = _coarse_grids(emap, coarse_res, climb_limit)

    def cell_of(p):
        return (
            int(np.clip((p[0] - emap.origin[0]) / coarse_res, 0, len(cx) - 1)),
            int(np.clip((p[1] - emap.origin[1]) / coarse_res, 0, len(cy) - 1)),
        )

    # prefer a footprint-radius berth around unclimbable steps, narrowing
    # only when no inflated route exists (tight entrances)
    path = None
    s_idx, g_idx = cell_of(start), cell_of(goal)
    for inflation in (GUIDE_INFLATION, 0.3, 0.15, 0.0):
        grown = _inflate(blocked, inflation, coarse_res)
        # an endpoint may itself sit inside an inflated halo (the robot
        # already stands there); free the non-raw-blocked disc around it
        r = int(math.ceil(inflation / coarse_res))
        for i, j in (s_idx, g_idx):
            if r >= 1 and grown[i, j] and not blocked[i, j]:
                ilo, ihi = max(0, i - r), min(grown.shape[0], i + r + 1)
                jlo, jhi = max(0, j - r), min(grown.shape[1], j + r + 1)
                win = grown[ilo:ihi, jlo:jhi]
                win &= blocked[ilo:ihi, jlo:jhi]
        path, cost = _grid_search(penalty, grown, s_idx, g_idx, coarse_res)
        if path is not None:
            break
    if path is None:
        raise NoPath("goal unreachable on the coarse guide grid")
    waypoints = np.array([[cx[i], cy[j]] for i, j in path])
    return GuidePath(
        waypoints=waypoints,
        total_cost=float(cost),
        blocked=grown,
        grid_res=coarse_res,
        grid_origin=np.asarray(emap.origin, dtype=float),
    )


# --------------------------------------------------------------------------
# trees


class PlanTree:
    """Forward tree of full-body states with a 2D nearest-node index."""

    def __init__(self, root: FullBodyState, root_phase: int = 0):
        self.states = [root]
        self.parents = [None]
        self.segments = [()]  # states travelled from the parent (exclusive)
        self.costs = [0.0]
        self.phases = [root_phase]
        self._xy = np.array([root.body_pos[:2]])

    def __len__(self):
        return len(self.states)

    def add(self, state, parent: int, segment, phase: int) -> int:
        seg_states = (self.states[parent],) + tuple(segment) + (state,)
        self.states.append(state)
        self.parents.append(parent)
        self.segments.append(tuple(segment))
        self.costs.append(self.costs[parent] + path_length(seg_states))
        self.phases.append(phase)
        self._xy = np.vstack([self._xy, state.body_pos[:2]])
        return len(self.states) - 1

    def nearest(self, xy) -> int:
        d = np.linalg.norm(self._xy - np.asarray(xy)[:2], axis=1)
        return int(np.argmin(d))  # argmin takes the smallest index on ties

    def near(self, xy, radius: float, k: int):
        """Up to k nearest node ids within radius, ordered by distance."""
        d = np.linalg.norm(self._xy - np.asarray(xy)[:2], axis=1)
        ids = np.lexsort((np.arange(d.size), d))
        out = [int(i) for i in ids if d[i] <= radius]
        return out[:k]

    def set_parent(self, node: int, parent: int, segment, cost: float):
        self.parents[node] = parent
        self.segments[node] = tuple(segment)
        delta = cost - self.costs[node]
        # propagate to the subtree
        stack = [node]
        children = {}
        for i, p in enumerate(self.parents):
            if p is not None:
                children.setdefault(p, []).append(i)
        while stack:
            i = stack.pop()
            self.costs[i] += delta
            stack.extend(children.get(i, []))

    def path_states(self, node: int):
        """Root-to-node state sequence (root first)."""
        chain = []
        i = node
        while i is not None:
            chain.append(i)
            i = self.parents[i]
        chain.reverse()
        states = [self.states[chain[0]]]
        for i in chain[1:]:
            states.extend(self.segments[i])
            states.append(self.states[i])
        return states


# --------------------------------------------------------------------------
# shared machinery


class _Clock:
    """Deterministic planning clock driven by constraint evaluations."""

    def __init__(self, counter: CheckCounter | None = None):
        self.counter = counter if counter is not None else CheckCounter()

    @property
    def now(self) -> float:
        return self.counter.n * CHECK_COST


def _sample_bounds(emap: ElevationMap):
    lo = np.array([SAMPLE_MARGIN, SAMPLE_MARGIN])
    hi = np.array([emap.x_max - SAMPLE_MARGIN, emap.y_max - SAMPLE_MARGIN])
    return lo, hi


def _uniform_sample(emap, rng, bounds=None):
    lo, hi = bounds if bounds is not None else _sample_bounds(emap)
    return rng.uniform(lo, hi)


def _local_bounds(emap, a_xy, b_xy, margin=1.0):
    """Sampling box around two points, clipped to the map sampling area."""
    lo_map, hi_map = _sample_bounds(emap)
    lo = np.minimum(a_xy, b_xy) - margin
    hi = np.maximum(a_xy, b_xy) + margin
    return np.maximum(lo, lo_map), np.minimum(hi, hi_map)


def _try_step(model, emap, tree, node, target_xy, clock):
    """One plan_step from a tree node; returns the new node id or None."""
    try:
        plan = plan_step(
            model, emap, tree.states[node], target_xy,
            phase=tree.phases[node], counter=clock.counter,
        )
    except PlanningError:
        return None
    if not plan.swing_legs and path_length(plan.states) < 1e-9:
        return None
    return tree.add(
        plan.end_state, node, plan.states[1:-1], tree.phases[node] + 1
    )


def _steer_sequence(model, emap, tree, node, target_xy, tol, clock, deadline):
    """Repeated steps from ``node`` toward ``target_xy``.

    Returns the last node reached (== ``node`` when no step succeeded);
    stops within ``tol`` of the target, on failure, or at the deadline.
    """
    cur = node
    for _ in range(MAX_SEQUENCE_STEPS):
        if np.linalg.norm(tree.states[cur].xy - target_xy) <= tol:
            break
        if clock.now >= deadline:
            break
        nxt = _try_step(model, emap, tree, cur, target_xy, clock)
        if nxt is None:
            break
        cur = nxt
    return cur


def _bridge(model, emap, a: FullBodyState, b: FullBodyState, clock):
    """Validated junction states between two nearby standing states."""
    res = check_segment(model, emap, a, b, counter=clock.counter)
    if not res:
        return None
    return (a, b)


def _join_path(tree_a, node_a, tree_b, node_b, bridge):
    """Full state sequence start-tree root -> junction -> goal-tree root."""
    forward = tree_a.path_states(node_a)
    backward = tree_b.path_states(node_b)
    states = list(forward)
    if bridge is not None:
        pass  # the junction pair is exactly (forward[-1], backward[-1])
    states.extend(reversed(backward))
    return tuple(states)


# --------------------------------------------------------------------------
# RRT-Connect


def _goal_state(model, emap, goal_xy, clock):
    return nominal_state(model, emap, goal_xy, 0.0, counter=clock.counter)


def _rrt_connect_impl(
    model, emap, start_state, goal_xy, cfg, clock, deadline, rng,
    tol=None, bounds=None,
):
    """Bidirectional connect search; returns (states, trees) on success."""
    if tol is None:
        tol = cfg.goal_tolerance
    goal_xy = np.asarray(goal_xy, dtype=float)[:2]
    if np.linalg.norm(start_state.xy - goal_xy) <= tol:
        return (start_state,), (PlanTree(start_state), None)
    goal_st = _goal_state(model, emap, goal_xy, clock)
    tree_a = PlanTree(start_state)  # rooted at the start
    tree_b = PlanTree(goal_st)  # rooted at the goal
    trees = (tree_a, tree_b)
    side = 0
    while clock.now < deadline:
        clock.counter.n += 1  # sampling / bookkeeping charge per round
        sample = _uniform_sample(emap, rng, bounds)
        grow, other = trees[side], trees[1 - side]
        node = _try_step(model, emap, grow, grow.nearest(sample), sample, clock)
        if node is not None:
            # greedy connection from the other tree to the fresh node
            target = grow.states[node].xy
            near = other.nearest(target)
            reached = _steer_sequence(
                model, emap, other, near, target, tol, clock, deadline,
            )
            if np.linalg.norm(other.states[reached].xy - target) <= tol:
                bridge = _bridge(
                    model, emap, other.states[reached], grow.states[node], clock
                )
                if bridge is not None:
                    if side == 0:
                        states = _join_path(grow, node, other, reached, bridge)
                    else:
                        states = _join_path(other, reached, grow, node, bridge)
                    return states, trees
        side = 1 - side
    err = Timeout(elapsed=clock.now)
    err.trees = trees  # callers may salvage partial progress
    raise err


def rrt_connect(model, emap, start, goal, cfg=PlannerConfig()) -> FullBodyPath:
    """Bidirectional RRT with single-step extensions and greedy connects."""
    clock = _Clock()
    rng = np.random.default_rng(cfg.rng_seed)
    states, trees = _rrt_connect_impl(
        model, emap, start, goal, cfg, clock, cfg.time_limit, rng
    )
    nodes = sum(len(t) for t in trees if t is not None)
    return FullBodyPath(
        states=states,
        length=path_length(states),
        plan_time=clock.now,
        node_count=nodes,
    )


# --------------------------------------------------------------------------
# GuidedRRT


def guided_rrt(model, emap, start, goal, cfg=PlannerConfig()) -> FullBodyPath:
    """RRT-Connect between temporary goals placed along an A* guide path."""
    goal_xy = np.asarray(goal, dtype=float)[:2]
    clock = _Clock()
    rng = np.random.default_rng(cfg.rng_seed)
    guide = astar_guide(emap, start.xy, goal_xy, climb_limit=model.climb_limit)
    total = guide.arc_lengths[-1]

    states = [start]
    node_count = 0
    cur = start
    hops = 1
    while np.linalg.norm(cur.xy - goal_xy) > cfg.goal_tolerance:
        if clock.now >= cfg.time_limit:
            raise Timeout(elapsed=clock.now)
        s = guide.project(cur.xy) + hops * cfg.d_rrt
        at_goal = s >= total
        temp = goal_xy if at_goal else guide.point_at(s)
        slice_end = min(cfg.time_limit, clock.now + GUIDED_SLICE)
        # waypoints along the guide need not be hit exactly; only the
        # global goal keeps the strict tolerance
        sub_tol = cfg.goal_tolerance if at_goal else max(
            cfg.goal_tolerance, WAYPOINT_TOLERANCE
        )
        # cheap greedy pre-pass: most guide hops cross open terrain where a
        # straight walk reaches the temporary goal in a couple of steps; the
        # final hop always goes through the connect search so the path ends
        # exactly at the goal
        greedy = PlanTree(cur)
        g_end = 0 if at_goal else _steer_sequence(
            model, emap, greedy, 0, temp, sub_tol, clock, slice_end
        )
        # committed waypoints must lie on standable (inflation-clear) cells
        # so later steps keep full stride; unclear cells are crossable but
        # make poor resting places
        if (g_end != 0 and np.linalg.norm(greedy.states[g_end].xy - temp) <= sub_tol
                and guide.clear_at(greedy.states[g_end].xy)):
            sub = greedy.path_states(g_end)
            node_count += len(greedy) - 1
            states.extend(sub[1:])
            cur = sub[-1]
            hops = 1
            continue
        try:
            # sub-problems are local: sample around the current position
            # and the temporary goal rather than the whole map
            sub, trees = _rrt_connect_impl(
                model, emap, cur, temp, cfg, clock, slice_end, rng,
                tol=sub_tol, bounds=_local_bounds(emap, cur.xy, temp),
            )
        except PlanningError as err:
            sub = None
            # a timed-out slice still grew a tree from ``cur``; commit the
            # standable node closest to the temporary goal instead of
            # starting over
            start_tree = getattr(err, "trees", (None,))[0]
            if start_tree is not None and len(start_tree) > 1:
                d_cur = np.linalg.norm(cur.xy - temp)
                node, gain = None, 1e-9
                for i in range(1, len(start_tree)):
                    if not guide.clear_at(start_tree.states[i].xy):
                        continue
                    g = d_cur - np.linalg.norm(start_tree.states[i].xy - temp)
                    if g > gain:
                        node, gain = i, g
                if node is not None:
                    sub = start_tree.path_states(node)
                    trees = (start_tree, None)
        if sub is None or np.linalg.norm(sub[-1].xy - cur.xy) < 1e-9:
            # no progress: push the temporary goal further out (eventually
            # the global goal itself) and retry until the time limit
            hops += 1
            continue
        node_count += sum(len(t) for t in trees if t is not None)
        states.extend(sub[1:])
        cur = sub[-1]
        hops = 1
    return FullBodyPath(
        states=tuple(states),
        length=path_length(states),
        plan_time=clock.now,
        node_count=node_count,
    )


# --------------------------------------------------------------------------
# RRT*-Connect


@dataclass
class _Junction:
    node_a: int
    node_b: int
    bridge_length: float


class _StarSearch:
    """Shared engine of the optimizing planners."""

    def __init__(self, model, emap, cfg, clock, rng):
        self.model = model
        self.emap = emap
        self.cfg = cfg
        self.clock = clock
        self.rng = rng
        self.tree_a = None
        self.tree_b = None
        self.junctions: list[_Junction] = []
        self.improvements: list[tuple] = []
        self.best = math.inf
        self.best_states = None

    # -- bookkeeping

    def _junction_cost(self, j: _Junction) -> float:
        return self.tree_a.costs[j.node_a] + j.bridge_length + self.tree_b.costs[j.node_b]

    def refresh_best(self):
        for j in self.junctions:
            c = self._junction_cost(j)
            if c < self.best - 1e-6:
                self.best = c
                self.best_states = _join_path(
                    self.tree_a, j.node_a, self.tree_b, j.node_b, True
                )
                self.improvements.append((self.clock.now, self.best))

    def _record_junction(self, node_a, node_b):
        a = self.tree_a.states[node_a]
        b = self.tree_b.states[node_b]
        bridge = _bridge(self.model, self.emap, a, b, self.clock)
        if bridge is None:
            return False
        self.junctions.append(
            _Junction(node_a, node_b, path_length([a, b]))
        )
        self.refresh_best()
        return True

    # -- growth

    def _extend(self, tree, sample, deadline):
        near = tree.nearest(sample)
        first = _try_step(self.model, self.emap, tree, near, sample, self.clock)
        if first is None:
            return None
        last = _steer_sequence(
            self.model, self.emap, tree, first, sample,
            self.cfg.goal_tolerance, self.clock, deadline,
        )
        return last

    def _rewire(self, tree, new_node, deadline):
        n = len(tree)
        radius = rewire_radius(n, self.cfg.dim, self.cfg.gamma)
        xy = tree.states[new_node].xy
        for cand in tree.near(xy, radius, self.cfg.n_rewire + 1):
            if self.clock.now >= deadline:
                break
            if cand == new_node or cand == tree.parents[new_node]:
                continue
            # never re-parent an ancestor of new_node (would create a loop)
            anc = tree.parents[new_node]
            is_ancestor = False
            while anc is not None:
                if anc == cand:
                    is_ancestor = True
                    break
                anc = tree.parents[anc]
            if is_ancestor or cand == 0:
                continue
            # route cand through new_node when that lowers its cost
            seq_start = len(tree)
            reached = _steer_sequence(
                self.model, self.emap, tree, new_node,
                tree.states[cand].xy, self.cfg.goal_tolerance,
                self.clock, deadline,
            )
            if reached == new_node:
                continue
            arrive = tree.states[reached]
            if np.linalg.norm(arrive.xy - tree.states[cand].xy) > self.cfg.goal_tolerance:
                continue
            bridge_len = path_length([arrive, tree.states[cand]])
            new_cost = tree.costs[reached] + bridge_len
            if new_cost >= tree.costs[cand] - 1e-6:
                continue
            if _bridge(self.model, self.emap, arrive, tree.states[cand], self.clock) is None:
                continue
            # collapse the freshly planned chain into one segment
            seg = []
            i = reached
            chain = []
            while i is not None and i >= seq_start:
                chain.append(i)
                i = tree.parents[i]
            for i in reversed(chain):
                seg.extend(tree.segments[i])
                seg.append(tree.states[i])
            tree.set_parent(cand, new_node, tuple(seg), new_cost)
        self.refresh_best()

    def grow(self, deadline, sampler):
        """One alternating extension + connection round."""
        self.clock.counter.n += 1  # sampling / bookkeeping charge per round
        sample = sampler()
        for tree, other, a_side in (
            (self.tree_a, self.tree_b, True),
            (self.tree_b, self.tree_a, False),
        ):
            if self.clock.now >= deadline:
                return
            node = self._extend(tree, sample, deadline)
            if node is None:
                continue
            self._rewire(tree, node, deadline)
            target = tree.states[node].xy
            reached = _steer_sequence(
                self.model, self.emap, other, other.nearest(target), target,
                self.cfg.goal_tolerance, self.clock, deadline,
            )
            if np.linalg.norm(other.states[reached].xy - target) <= self.cfg.goal_tolerance:
                if a_side:
                    self._record_junction(node, reached)
                else:
                    self._record_junction(reached, node)

    @property
    def node_count(self):
        return len(self.tree_a) + (len(self.tree_b) if self.tree_b else 0)


def _finish(search: _StarSearch) -> FullBodyPath:
    if search.best_states is None:
        raise Timeout(elapsed=search.clock.now)
    return FullBodyPath(
        states=tuple(search.best_states),
        length=search.best,
        plan_time=search.improvements[-1][0] if search.improvements else search.clock.now,
        node_count=search.node_count,
        improvements=tuple(search.improvements),
    )


def rrt_star_connect(
    model, emap, start, goal, cfg=PlannerConfig(), sampler=None
) -> FullBodyPath:
    """Anytime bidirectional RRT* with bounded (N-nearest) rewiring."""
    clock = _Clock()
    rng = np.random.default_rng(cfg.rng_seed)
    goal_xy = np.asarray(goal, dtype=float)[:2]
    search = _StarSearch(model, emap, cfg, clock, rng)
    search.tree_a = PlanTree(start)
    search.tree_b = PlanTree(_goal_state(model, emap, goal_xy, clock))
    draw = sampler if sampler is not None else (lambda: _uniform_sample(emap, rng))
    # first connection within the overall limit
    while search.best_states is None:
        if clock.now >= cfg.time_limit:
            raise Timeout(elapsed=clock.now)
        search.grow(cfg.time_limit, draw)
    # bounded optimization phase
    deadline = min(cfg.time_limit, clock.now + cfg.opt_time)
    while clock.now < deadline:
        search.grow(deadline, draw)
    return _finish(search)


def inject_path_as_tree(model, path: FullBodyPath):
    """Convert a found path into a start tree / goal tree pair.

    The prefix up to the midpoint state populates the start-rooted tree and
    the suffix, reversed, the goal-rooted tree; both carry cumulative path
    costs.  Returns (tree_a, tree_b, c_best).
    """
    states = tuple(path.states)
    if len(states) < 2:
        raise EmptyPath("need at least two states to inject")
    mid = len(states) // 2
    tree_a = PlanTree(states[0])
    prev = 0
    for s in states[1 : mid + 1]:
        prev = tree_a.add(s, prev, (), tree_a.phases[prev] + 1)
    tree_b = PlanTree(states[-1])
    prev = 0
    for s in states[mid:-1][::-1]:
        prev = tree_b.add(s, prev, (), tree_b.phases[prev] + 1)
    return tree_a, tree_b, path_length(states)


def _informed_optimize(search: _StarSearch, start_xy, goal_xy, deadline):
    """Optimization rounds with ellipse sampling at the running best cost."""
    emap = search.emap
    rng = search.rng
    lo, hi = _sample_bounds(emap)

    c_min = float(np.linalg.norm(np.asarray(goal_xy) - np.asarray(start_xy)))

    def draw():
        c = search.best
        if not math.isfinite(c):
            return _uniform_sample(emap, rng)
        # solutions accepted within the goal tolerance may measure slightly
        # shorter than the focal distance; fall back to the degenerate
        # (segment) ellipse instead of failing
        return informed_sample(start_xy, goal_xy, max(c, c_min), rng, bounds=(lo, hi))

    while search.clock.now < deadline:
        search.grow(deadline, draw)


def informed_rrt_star_connect(model, emap, start, goal, cfg=PlannerConfig()):
    """RRT*-Connect whose optimization phase samples the informed ellipse."""
    clock = _Clock()
    rng = np.random.default_rng(cfg.rng_seed)
    goal_xy = np.asarray(goal, dtype=float)[:2]
    search = _StarSearch(model, emap, cfg, clock, rng)
    search.tree_a = PlanTree(start)
    search.tree_b = PlanTree(_goal_state(model, emap, goal_xy, clock))
    while search.best_states is None:
        if clock.now >= cfg.time_limit:
            raise Timeout(elapsed=clock.now)
        search.grow(cfg.time_limit, lambda: _uniform_sample(emap, rng))
    deadline = min(cfg.time_limit, clock.now + cfg.opt_time)
    _informed_optimize(search, start.xy, goal_xy, deadline)
    return _finish(search)


def igrsc(model, emap, start, goal, cfg=PlannerConfig()) -> FullBodyPath:
    """Guided first solution, path injection, informed optimization."""
    initial = guided_rrt(model, emap, start, goal, cfg)
    clock = _Clock()
    clock.counter.n = int(round(initial.plan_time / CHECK_COST))
    rng = np.random.default_rng(cfg.rng_seed + 1)
    goal_xy = np.asarray(goal, dtype=float)[:2]
    search = _StarSearch(model, emap, cfg, clock, rng)
    tree_a, tree_b, c_best = inject_path_as_tree(model, initial)
    search.tree_a = tree_a
    search.tree_b = tree_b
    mid_a = len(tree_a) - 1
    mid_b = len(tree_b) - 1
    search.junctions.append(_Junction(mid_a, mid_b, 0.0))
    search.refresh_best()
    deadline = clock.now + cfg.opt_time
    _informed_optimize(search, start.xy, goal_xy, deadline)
    result = _finish(search)
    if result.length > c_best:  # improvement-only acceptance
        return FullBodyPath(
            states=initial.states,
            length=initial.length,
            plan_time=initial.plan_time,
            node_count=initial.node_count,
            improvements=((initial.plan_time, initial.length),),
        )
    return result
