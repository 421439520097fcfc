"""Perception-fed model predictive control on a simulated arm."""

from ._core import (
    AngleNearPi,
    KinematicChain,
    OltError,
    ParseError,
    Pose,
    RunConfig,
    SolverDiverged,
    ValidationError,
    __version__,
    aba,
    closed_loop,
    forward_kinematics,
    gravity_torque,
    interpolate,
    make_arm3,
    make_pendulum,
    parse_config,
    parse_config_text,
    pose_distance,
    preset_config,
    preset_names,
    recall_sweep,
    rnea,
    serialize_config,
    solve_tracking,
    step_response,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
