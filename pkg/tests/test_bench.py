import math

import numpy as np
import pytest

from legplan import bench, cli
from legplan.errors import ParseError
from legplan.planners import FullBodyPath, PlannerConfig, rrt_connect
from legplan.local_planner import nominal_state
from legplan.terrain import load_map


@pytest.fixture(scope="module")
def flat_hex_path(hex_model, flat_map, start_goal):
    start_xy, goal_xy = start_goal
    start = nominal_state(hex_model, flat_map, start_xy)
    return rrt_connect(hex_model, flat_map, start, goal_xy, PlannerConfig(rng_seed=42))


def _tiny_config(tmp_path=None, **kw):
    defaults = dict(
        scenarios=("flat",),
        robots=("hexapod",),
        planners=("rrtconnect",),
        trials=2,
        seed=42,
    )
    defaults.update(kw)
    return bench.BenchConfig(**defaults)


def test_bench_config_validation():
    with pytest.raises(ValueError):
        bench.BenchConfig(scenarios=("swamp",))
    with pytest.raises(ValueError):
        bench.BenchConfig(planners=("dijkstra",))
    with pytest.raises(ValueError):
        bench.BenchConfig(trials=0)


def test_summarize_matches_manual_stats():
    rows = [
        bench.TrialResult("flat", "hexapod", "rrtconnect", 0, 42, True, 10.0, 5.0, 3),
        bench.TrialResult("flat", "hexapod", "rrtconnect", 1, 43, True, 14.0, 4.0, 4),
        bench.TrialResult("flat", "hexapod", "rrtconnect", 2, 44, False, 0.0, 0.0, 0),
    ]
    (s,) = bench.summarize(rows)
    assert s.trials == 3
    assert s.success_rate == pytest.approx(2 / 3)
    assert s.mean_time == pytest.approx(12.0)
    assert s.std_time == pytest.approx(np.std([10.0, 14.0], ddof=1))
    assert s.mean_length == pytest.approx(4.5)


def test_summarize_all_failures_gives_nan():
    rows = [bench.TrialResult("box", "hexapod", "igrsc", 0, 42, False, 0.0, 0.0, 0)]
    (s,) = bench.summarize(rows)
    assert s.success_rate == 0.0
    assert math.isnan(s.mean_time) and math.isnan(s.mean_length)


def test_path_document_roundtrip(flat_hex_path):
    doc = bench.export_path(flat_hex_path, robot="hexapod", scenario="flat", seed=42)
    meta, states = bench.load_path(doc)
    assert meta == {"robot": "hexapod", "scenario": "flat", "seed": 42}
    assert len(states) == len(flat_hex_path.states)
    for a, b in zip(states, flat_hex_path.states):
        assert np.allclose(a.body_pos, b.body_pos, atol=1e-9)
        assert np.allclose(a.body_quat, b.body_quat, atol=1e-9)
        assert np.allclose(a.joint_angles, b.joint_angles, atol=1e-9)
        assert np.array_equal(a.stance, b.stance)
        assert np.allclose(a.foot_world, b.foot_world, atol=1e-9)


def test_path_document_single_state(hex_model, flat_map):
    st = nominal_state(hex_model, flat_map, (1.0, 3.0))
    path = FullBodyPath(states=(st,), length=0.0, plan_time=0.0)
    doc = bench.export_path(path, robot="hexapod")
    meta, states = bench.load_path(doc)
    assert len(states) == 1


def test_load_path_error_reporting():
    with pytest.raises(ParseError):
        bench.load_path("BOGUS\n")
    with pytest.raises(ParseError) as exc:
        bench.load_path("LEGPATH 1\nrobot hexapod scenario flat seed 42\nwaypoints 1\n1 2 3\n")
    assert exc.value.line == 4


def test_run_benchmark_outputs(tmp_path):
    out = tmp_path / "results"
    cfg = _tiny_config(out_dir=str(out))
    results, summaries = bench.run_benchmark(cfg)
    assert len(results) == 2
    assert (out / "trials.csv").exists()
    assert (out / "summary.csv").exists()
    assert (out / "maps" / "flat.map").exists()
    header = (out / "trials.csv").read_text().splitlines()[0]
    assert header == ",".join(bench.TRIAL_COLUMNS)
    header = (out / "summary.csv").read_text().splitlines()[0]
    assert header == ",".join(bench.SUMMARY_COLUMNS)
    for r in results:
        if r.success:
            name = f"{r.scenario}_{r.robot}_{r.planner}_{r.trial}.path"
            assert (out / "paths" / name).exists()
    # the exported map reloads to the generated scenario
    emap = load_map((out / "maps" / "flat.map").read_bytes())
    assert emap.max_height() == 0.0


def test_rerun_is_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    bench.run_benchmark(_tiny_config(out_dir=str(out_a)))
    bench.run_benchmark(_tiny_config(out_dir=str(out_b)))
    assert (out_a / "trials.csv").read_bytes() == (out_b / "trials.csv").read_bytes()
    assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()


def test_export_scene_svg(flat_map, flat_hex_path, start_goal):
    start, goal = start_goal
    svg = bench.export_scene(
        flat_map,
        path=flat_hex_path,
        ellipse=(start, goal, flat_hex_path.length),
    )
    assert svg.lstrip().startswith("<?xml")
    assert "<svg" in svg and "</svg>" in svg


def test_cli_parser_rejects_unknown_names():
    parser = cli.build_parser()
    args = parser.parse_args(["run", "--scenario", "flat", "--out", "x"])
    assert args.scenario == "flat"
    with pytest.raises(Exception):
        cli._split("volcano", bench.SCENARIOS, "scenario")
    assert cli._split("all", bench.ROBOTS, "robot") == bench.ROBOTS
    assert cli._split("flat,box", bench.SCENARIOS, "scenario") == ("flat", "box")


def test_cli_run_and_export_scene(tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main([
        "run", "--scenario", "flat", "--robot", "hexapod",
        "--planner", "rrtconnect", "--trials", "1", "--seed", "42",
        "--out", str(out),
    ])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "flat" in printed and "rrtconnect" in printed

    svg_file = tmp_path / "scene.svg"
    rc = cli.main([
        "export-scene",
        "--map", str(out / "maps" / "flat.map"),
        "--path", str(out / "paths" / "flat_hexapod_rrtconnect_0.path"),
        "--out", str(svg_file),
    ])
    assert rc == 0
    assert svg_file.read_text().lstrip().startswith("<?xml")
