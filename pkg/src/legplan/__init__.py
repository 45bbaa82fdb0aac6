"""Full-body path planning and benchmarking for statically stable legged
robots: elevation-map terrain, hexapod/quadruped kinematics, constraint
checking, a gait-level local planner, and a ladder of sampling-based global
planners with a deterministic benchmark harness."""

__version__ = "0.1.0"
