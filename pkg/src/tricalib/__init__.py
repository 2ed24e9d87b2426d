"""Extrinsic calibration toolkit for LiDAR/RADAR/camera rigs.

Covers the deterministic core of a joint three-sensor calibration pipeline:
SE(3)/quaternion algebra, point-cloud projection and bird's-eye-view
rasterization, correlation cost volumes and feature fusion, loop-closure
message-passing refinement, calibration loss evaluators, an online drift
monitor with outlier rejection, and a seeded drift simulator that stands in
for a learned prediction source.
"""

from .se3 import (
    EulerAngles,
    RigidTransform,
    Translation3,
    UnitQuaternion,
    angular_distance_deg,
    format_transform,
    parse_transform,
    slerp,
)
from .refiner import CalibrationTriple, LoopResidual, MpnConfig, loop_residual, refine

__all__ = [
    "EulerAngles",
    "RigidTransform",
    "Translation3",
    "UnitQuaternion",
    "angular_distance_deg",
    "format_transform",
    "parse_transform",
    "slerp",
    "CalibrationTriple",
    "LoopResidual",
    "MpnConfig",
    "loop_residual",
    "refine",
]

__version__ = "0.1.0"
