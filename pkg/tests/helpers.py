"""Shared seeded-random factories for the test suite."""

import numpy as np

from tricalib.refiner import CalibrationTriple
from tricalib.se3 import RigidTransform, Translation3, UnitQuaternion


def random_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    w, x, y, z = rng.normal(size=4)
    return UnitQuaternion(float(w), float(x), float(y), float(z))


def random_translation(rng: np.random.Generator, scale: float = 2.0) -> Translation3:
    x, y, z = rng.uniform(-scale, scale, size=3)
    return Translation3(float(x), float(y), float(z))


def random_transform(rng: np.random.Generator, trans_scale: float = 2.0) -> RigidTransform:
    return RigidTransform(random_quaternion(rng), random_translation(rng, trans_scale))


def consistent_triple(rng: np.random.Generator) -> CalibrationTriple:
    """Random triple that satisfies the loop constraint exactly."""
    lidar_cam = random_transform(rng)
    radar_cam = random_transform(rng)
    return CalibrationTriple(
        lidar_cam=lidar_cam,
        radar_cam=radar_cam,
        lidar_radar=radar_cam.compose(lidar_cam.inverse()),
    )


def rot(axis, deg) -> RigidTransform:
    return RigidTransform(UnitQuaternion.from_axis_angle(axis, deg), Translation3.zero())


def rot_z(deg) -> RigidTransform:
    return rot((0.0, 0.0, 1.0), deg)
