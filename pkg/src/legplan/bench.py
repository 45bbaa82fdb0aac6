"""Benchmark harness: multi-trial planner runs, statistics, and exports."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, PlanningError
from .planners import (
    FullBodyPath,
    PlannerConfig,
    guided_rrt,
    igrsc,
    informed_rrt_star_connect,
    rrt_connect,
    rrt_star_connect,
)
from .local_planner import nominal_state
from .robot import FullBodyState, make_robot, make_state
from .terrain import (
    ElevationMap,
    ScenarioSpec,
    default_start_goal,
    generate_scenario,
    save_map,
)

SCENARIOS = ("flat", "rough", "box", "bugtrap")
ROBOTS = ("hexapod", "quadruped")
PLANNERS = ("rrtconnect", "guidedrrt", "rrtstarconnect", "irrtstarconnect", "igrsc")

_PLANNER_FNS = {
    "rrtconnect": rrt_connect,
    "guidedrrt": guided_rrt,
    "rrtstarconnect": rrt_star_connect,
    "irrtstarconnect": informed_rrt_star_connect,
    "igrsc": igrsc,
}
#: CLI scenario names to generator kinds.
_SCENARIO_KIND = {
    "flat": "flat",
    "rough": "rough",
    "box": "box",
    "bugtrap": "bug_trap",
}

TRIAL_COLUMNS = (
    "scenario", "robot", "planner", "trial", "seed",
    "success", "plan_time_s", "path_length_m", "node_count",
)
SUMMARY_COLUMNS = (
    "scenario", "robot", "planner", "trials", "success_rate",
    "mean_time_s", "std_time_s", "mean_length_m", "std_length_m",
)


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    robot: str
    planner: str
    trial: int
    seed: int
    success: bool
    plan_time: float
    path_length: float
    node_count: int
    improvement_log: tuple = ()
    path: FullBodyPath | None = None


@dataclass(frozen=True)
class Summary:
    scenario: str
    robot: str
    planner: str
    trials: int
    success_rate: float
    mean_time: float
    std_time: float
    mean_length: float
    std_length: float


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple = SCENARIOS
    robots: tuple = ("hexapod",)
    planners: tuple = PLANNERS
    trials: int = 10
    seed: int = 42
    opt_time: float = 10.0
    time_limit: float = 60.0
    entrance_width: float = 1.2
    out_dir: str | None = None

    def __post_init__(self):
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise ValueError(f"unknown scenario {s!r}")
        for r in self.robots:
            if r not in ROBOTS:
                raise ValueError(f"unknown robot {r!r}")
        for p in self.planners:
            if p not in PLANNERS:
                raise ValueError(f"unknown planner {p!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def _fmt(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


def summarize(results) -> list[Summary]:
    """Per-(scenario, robot, planner) statistics; time/length over successes."""
    cells = {}
    for r in results:
        cells.setdefault((r.scenario, r.robot, r.planner), []).append(r)
    out = []
    for (scenario, robot, planner), rows in cells.items():
        ok = [r for r in rows if r.success]
        times = np.array([r.plan_time for r in ok])
        lengths = np.array([r.path_length for r in ok])

        def mean(v):
            return float(np.mean(v)) if v.size else math.nan

        def std(v):
            return float(np.std(v, ddof=1)) if v.size > 1 else (0.0 if v.size else math.nan)

        out.append(
            Summary(
                scenario=scenario,
                robot=robot,
                planner=planner,
                trials=len(rows),
                success_rate=len(ok) / len(rows),
                mean_time=mean(times),
                std_time=std(times),
                mean_length=mean(lengths),
                std_length=std(lengths),
            )
        )
    return out


def run_benchmark(cfg: BenchConfig):
    """Execute the configured sweep; returns (trial results, summaries).

    With ``cfg.out_dir`` set, also writes trials.csv, summary.csv, the
    scenario maps, and one path document per successful trial.
    """
    out = cfg.out_dir
    if out:
        os.makedirs(out, exist_ok=True)
        os.makedirs(os.path.join(out, "paths"), exist_ok=True)
        os.makedirs(os.path.join(out, "maps"), exist_ok=True)

    results = []
    for scenario in cfg.scenarios:
        spec = ScenarioSpec(
            _SCENARIO_KIND[scenario],
            seed=cfg.seed,
            entrance_width=cfg.entrance_width,
        )
        emap = generate_scenario(spec)
        start_xy, goal_xy = default_start_goal(spec.extent)
        if out:
            with open(os.path.join(out, "maps", f"{scenario}.map"), "wb") as f:
                f.write(save_map(emap))
        for robot in cfg.robots:
            model = make_robot(robot)
            try:
                start = nominal_state(model, emap, start_xy)
            except PlanningError:
                start = None
            for planner in cfg.planners:
                fn = _PLANNER_FNS[planner]
                for trial in range(cfg.trials):
                    seed = cfg.seed + trial
                    pcfg = PlannerConfig(
                        opt_time=cfg.opt_time,
                        time_limit=cfg.time_limit,
                        rng_seed=seed,
                    )
                    path = None
                    if start is not None:
                        try:
                            path = fn(model, emap, start, goal_xy, pcfg)
                        except PlanningError:
                            path = None
                    result = TrialResult(
                        scenario=scenario,
                        robot=robot,
                        planner=planner,
                        trial=trial,
                        seed=seed,
                        success=path is not None,
                        plan_time=path.plan_time if path else 0.0,
                        path_length=path.length if path else 0.0,
                        node_count=path.node_count if path else 0,
                        improvement_log=path.improvements if path else (),
                        path=path,
                    )
                    results.append(result)
                    if out and path is not None:
                        name = f"{scenario}_{robot}_{planner}_{trial}.path"
                        doc = export_path(
                            path, robot=robot, scenario=scenario, seed=seed
                        )
                        with open(os.path.join(out, "paths", name), "w") as f:
                            f.write(doc)
    summaries = summarize(results)
    if out:
        write_trial_csv(results, os.path.join(out, "trials.csv"))
        write_summary_csv(summaries, os.path.join(out, "summary.csv"))
    return results, summaries


def write_trial_csv(results, path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRIAL_COLUMNS)
        for r in results:
            w.writerow(
                [
                    r.scenario, r.robot, r.planner, r.trial, r.seed,
                    "true" if r.success else "false",
                    _fmt(r.plan_time), _fmt(r.path_length), r.node_count,
                ]
            )


def write_summary_csv(summaries, path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            w.writerow(
                [
                    s.scenario, s.robot, s.planner, s.trials,
                    _fmt(s.success_rate), _fmt(s.mean_time), _fmt(s.std_time),
                    _fmt(s.mean_length), _fmt(s.std_length),
                ]
            )


# --------------------------------------------------------------------------
# path documents


def export_path(path: FullBodyPath, robot: str, scenario: str = "", seed: int = 0) -> str:
    """Serialise a path to the LEGPATH 1 text format.

    One waypoint line per state: time, body position, orientation
    quaternion (w x y z), all joint angles, then per-leg stance flags.
    """
    buf = io.StringIO()
    buf.write("LEGPATH 1\n")
    buf.write(f"robot {robot} scenario {scenario or '-'} seed {seed}\n")
    buf.write(f"waypoints {len(path.states)}\n")
    for i, s in enumerate(path.states):
        fields = [repr(float(i))]
        fields += [repr(float(v)) for v in s.body_pos]
        fields += [repr(float(v)) for v in s.body_quat]
        fields += [repr(float(v)) for v in s.joint_angles.ravel()]
        fields += ["1" if bool(v) else "0" for v in s.stance]
        buf.write(" ".join(fields) + "\n")
    return buf.getvalue()


def load_path(text: str):
    """Parse a LEGPATH 1 document; returns (meta dict, state tuple)."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "LEGPATH 1":
        raise ParseError("missing LEGPATH 1 header", line=1)
    try:
        toks = lines[1].split()
        meta = {"robot": toks[1], "scenario": toks[3], "seed": int(toks[5])}
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed metadata line: {exc}", line=2) from None
    try:
        count = int(lines[2].split()[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed waypoint count: {exc}", line=3) from None
    model = make_robot(meta["robot"])
    L = model.leg_count
    n_fields = 1 + 3 + 4 + 3 * L + L
    states = []
    for k in range(count):
        lineno = 4 + k
        try:
            vals = lines[3 + k].split()
        except IndexError:
            raise ParseError("truncated waypoint list", line=lineno) from None
        if len(vals) != n_fields:
            raise ParseError(
                f"expected {n_fields} fields, got {len(vals)}", line=lineno
            )
        try:
            nums = [float(v) for v in vals[: 1 + 3 + 4 + 3 * L]]
            stance = np.array([v == "1" for v in vals[1 + 3 + 4 + 3 * L :]])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        pos = np.array(nums[1:4])
        quat = np.array(nums[4:8])
        joints = np.array(nums[8:]).reshape(L, 3)
        states.append(make_state(model, pos, quat, joints, stance))
    return meta, tuple(states)


# --------------------------------------------------------------------------
# scene rendering


def export_scene(
    emap: ElevationMap,
    trees=None,
    path=None,
    ellipse=None,
    footprints: bool = True,
    out: str | None = None,
):
    """Top-down SVG: shaded terrain, tree edges, path, contacts, ellipse.

    ``trees`` is an iterable of PlanTree; ``ellipse`` is (start_xy,
    goal_xy, c_best).  Returns the SVG text; also written to ``out``.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import LineCollection
    from matplotlib.patches import Ellipse

    fig, ax = plt.subplots(figsize=(6, 6))
    extent = (
        float(emap.origin[0]), emap.x_max, float(emap.origin[1]), emap.y_max
    )
    ax.imshow(
        emap.heights, origin="lower", extent=extent, cmap="gray",
        interpolation="nearest",
    )
    if trees:
        segs = []
        for tree in trees:
            for i, parent in enumerate(tree.parents):
                if parent is None:
                    continue
                segs.append(
                    [tree.states[parent].body_pos[:2], tree.states[i].body_pos[:2]]
                )
        if segs:
            ax.add_collection(
                LineCollection(segs, colors="tab:blue", linewidths=0.4, alpha=0.6)
            )
    if path is not None:
        states = path.states if hasattr(path, "states") else tuple(path)
        xy = np.array([s.body_pos[:2] for s in states])
        ax.plot(xy[:, 0], xy[:, 1], color="tab:red", linewidth=1.5)
        if footprints:
            feet = np.concatenate(
                [s.foot_world[s.stance][:, :2] for s in states[:: max(1, len(states) // 60)]]
            )
            ax.plot(feet[:, 0], feet[:, 1], ".", color="tab:orange", markersize=1.5)
    if ellipse is not None:
        s, g, c_best = ellipse
        s = np.asarray(s, float)[:2]
        g = np.asarray(g, float)[:2]
        c_min = float(np.linalg.norm(g - s))
        width = c_best
        height = math.sqrt(max(c_best * c_best - c_min * c_min, 0.0))
        angle = math.degrees(math.atan2(g[1] - s[1], g[0] - s[0]))
        ax.add_patch(
            Ellipse(
                0.5 * (s + g), width, height, angle=angle,
                fill=False, edgecolor="white", linewidth=1.2,
            )
        )
    ax.set_xlim(extent[0], extent[1])
    ax.set_ylim(extent[2], extent[3])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    buf = io.StringIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    svg = buf.getvalue()
    if out:
        with open(out, "w") as f:
            f.write(svg)
    return svg
