"""Evaluators for the calibration training-loss terms, used as metrics.

No gradients anywhere; these score predictions against ground truth for
validation and simulator reporting. Rotation terms use the quaternion
geodesic angle in radians so they are commensurable with the translation
terms, which use Smooth L1 per axis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .projection import PointCloud
from .refiner import CalibrationTriple
from .se3 import RigidTransform, angular_distance_deg


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the combined objective.

    The pose term enters the total with coefficient 1 - (lambda_c + lambda_l),
    so those two must not exceed 1 together. No canonical values exist; these
    defaults are configuration, not claims.
    """

    lambda_r: float = 1.0
    lambda_t: float = 1.0
    lambda_c: float = 0.1
    lambda_l: float = 0.1
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("lambda_r", "lambda_t", "lambda_c", "lambda_l", "gamma"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.lambda_c + self.lambda_l > 1.0:
            raise ValueError("lambda_c + lambda_l must not exceed 1")


class PoseLossTerms(NamedTuple):
    total: float
    rotation: float  # summed geodesic angles, radians
    translation: float  # summed per-axis Smooth L1


def smooth_l1(x: float, y: float) -> float:
    """Smooth L1 with the quadratic/linear transition at |x - y| = 1."""
    d = abs(x - y)
    return 0.5 * d * d if d < 1.0 else d - 0.5


def pair_pose_loss(pred: RigidTransform, gt: RigidTransform, w: LossWeights) -> PoseLossTerms:
    """Pose loss of a single sensor pair."""
    rot = math.radians(angular_distance_deg(gt.rotation, pred.rotation))
    trans = sum(
        smooth_l1(g, p)
        for g, p in zip(gt.translation.as_tuple(), pred.translation.as_tuple())
    )
    return PoseLossTerms(w.lambda_r * rot + w.lambda_t * trans, rot, trans)


def pose_loss(pred: CalibrationTriple, gt: CalibrationTriple, w: LossWeights) -> PoseLossTerms:
    """Pose loss summed over the three sensor pairs.

    Rotation part: sum of geodesic angles, in radians. Translation part: sum
    of per-axis Smooth L1 over the three pairs.
    """
    rot = 0.0
    trans = 0.0
    for (_, p), (_, g) in zip(pred.items(), gt.items()):
        term = pair_pose_loss(p, g, w)
        rot += term.rotation
        trans += term.translation
    return PoseLossTerms(w.lambda_r * rot + w.lambda_t * trans, rot, trans)


def point_cloud_loss(
    cloud: PointCloud,
    t_gt: RigidTransform,
    t_pred: RigidTransform,
    t_init: RigidTransform,
) -> float:
    """Mean displacement of the cloud under gt * pred^-1 * init.

    A perfect prediction makes the composite the identity and the loss 0.
    An empty cloud scores 0 with a warning, so batch evaluation over sparse
    frames never aborts.
    """
    if len(cloud) == 0:
        warnings.warn("point_cloud_loss over an empty cloud, returning 0", stacklevel=2)
        return 0.0
    composite = t_gt.compose(t_pred.inverse()).compose(t_init)
    m = composite.to_matrix()
    moved = cloud.points @ m[:3, :3].T + m[:3, 3]
    return float(np.mean(np.linalg.norm(moved - cloud.points, axis=1)))


def point_cloud_loss_pair_sum(
    lidar_cloud: PointCloud,
    radar_cloud: PointCloud,
    gt: CalibrationTriple,
    pred: CalibrationTriple,
    init: CalibrationTriple,
) -> float:
    """Sum of the LiDAR and RADAR cloud losses against the camera pairs."""
    return point_cloud_loss(lidar_cloud, gt.lidar_cam, pred.lidar_cam, init.lidar_cam) + point_cloud_loss(
        radar_cloud, gt.radar_cam, pred.radar_cam, init.radar_cam
    )


def loop_closure_loss(pred: CalibrationTriple, w: LossWeights) -> float:
    """Mean pose loss between each transform and the one its loop implies.

    The loop estimates are formed in the inverse (camera-to-sensor) direction,
    so the triple members are inverted, combined, and compared there.
    """
    cl = pred.lidar_cam.inverse()
    cr = pred.radar_cam.inverse()
    lr = pred.lidar_radar.inverse()
    loop_lr = cl.inverse().compose(cr)
    loop_cl = cr.compose(lr.inverse())
    loop_cr = cl.compose(lr)
    total = (
        pair_pose_loss(loop_lr, lr, w).total
        + pair_pose_loss(loop_cl, cl, w).total
        + pair_pose_loss(loop_cr, cr, w).total
    )
    return total / 3.0


def accuracy_penalty(final_pose_loss: float, intermediate_pose_loss: float) -> float:
    """Positive part of (final - intermediate): refinement may only be
    penalized for making the pose loss worse."""
    return max(0.0, final_pose_loss - intermediate_pose_loss)


def total_loss(l_p: float, l_c: float, l_l: float, l_a: float, w: LossWeights) -> float:
    return (1.0 - (w.lambda_c + w.lambda_l)) * l_p + w.lambda_c * l_c + w.lambda_l * l_l + w.gamma * l_a


@dataclass(frozen=True)
class LossReport:
    """All loss components of one frame."""

    l_p: float
    l_r: float
    l_t: float
    l_c: float
    l_l: float
    l_a: float
    total: float

    CSV_HEADER = "l_p,l_r,l_t,l_c,l_l,l_a,total"

    def csv_row(self) -> str:
        return ",".join(
            f"{v:.9g}" for v in (self.l_p, self.l_r, self.l_t, self.l_c, self.l_l, self.l_a, self.total)
        )


def evaluate_losses(
    pred: CalibrationTriple,
    gt: CalibrationTriple,
    w: LossWeights = LossWeights(),
    intermediate: CalibrationTriple | None = None,
    clouds: tuple[PointCloud, PointCloud] | None = None,
    init: CalibrationTriple | None = None,
) -> LossReport:
    """Assemble the full report for one frame.

    The cloud term needs both clouds and the initial triple; the accuracy
    penalty needs the pre-refinement intermediate triple. Missing inputs
    contribute 0.
    """
    p = pose_loss(pred, gt, w)
    l_c = 0.0
    if clouds is not None:
        if init is None:
            raise ValueError("cloud loss needs the initial calibration triple")
        l_c = point_cloud_loss_pair_sum(clouds[0], clouds[1], gt, pred, init)
    l_l = loop_closure_loss(pred, w)
    l_a = 0.0
    if intermediate is not None:
        l_a = accuracy_penalty(p.total, pose_loss(intermediate, gt, w).total)
    return LossReport(
        l_p=p.total,
        l_r=p.rotation,
        l_t=p.translation,
        l_c=l_c,
        l_l=l_l,
        l_a=l_a,
        total=total_loss(p.total, l_c, l_l, l_a, w),
    )
