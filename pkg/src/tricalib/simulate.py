"""Seeded drift simulator: a deterministic stand-in for a learned predictor.

The simulator keeps one mounting pose per sensor and derives the ground-truth
pair transforms from them, so any drift applied to a single mounting keeps the
ground truth loop-consistent by construction. Per frame it emits, for each
pair, the correction transform that would map the monitor's current
calibration onto the drifted truth (``gt * init^-1``, identity when calibrated),
composed with zero-mean Gaussian noise and occasional single-frame outlier
spikes. Predictions can optionally be passed through the message-passing
refiner before reaching the monitor.

A drift event at frame k changes the mounting after frame k's prediction has
been emitted; the first affected prediction is frame k + 1.

Everything is driven by one seeded generator with all noise pre-drawn, so a
given scenario reproduces its frame log byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .monitor import MonitorConfig, RigMonitor, UpdateEvent, pairs_involving
from .refiner import PAIR_NAMES, CalibrationTriple, MpnConfig, loop_residual, refine
from .se3 import EulerAngles, RigidTransform, Translation3, UnitQuaternion, angular_distance_deg

SENSORS = ("lidar", "radar", "camera")


@dataclass(frozen=True)
class NoiseModel:
    """Per-axis Gaussian prediction noise plus an isolated-spike outlier model.

    Defaults keep consecutive-frame deltas below the 0.05 deg / 1.0 cm
    consistency thresholds with high probability.
    """

    rot_sigma_deg: float = 0.015
    trans_sigma_m: float = 0.003
    outlier_prob: float = 0.01
    outlier_scale: float = 10.0

    def __post_init__(self):
        if self.rot_sigma_deg < 0.0 or self.trans_sigma_m < 0.0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier probability must be in [0, 1]")
        if self.outlier_scale < 1.0:
            raise ValueError("outlier scale must be at least 1")


@dataclass(frozen=True)
class DriftEvent:
    """A step change of one sensor's mounting pose (applied in its own frame)."""

    frame: int
    sensor: str
    delta: RigidTransform

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError("event frame must be non-negative")
        if self.sensor not in SENSORS:
            raise ValueError(f"unknown sensor {self.sensor!r}, expected one of {SENSORS}")


@dataclass(frozen=True)
class MiscalRange:
    """Bounded random perturbation: per-axis rotation and translation limits."""

    rotation_deg: float
    translation_m: float

    def __post_init__(self):
        if self.rotation_deg < 0.0 or self.translation_m < 0.0:
            raise ValueError("miscalibration bounds must be non-negative")


@dataclass(frozen=True)
class DriftScenario:
    frames: int
    ground_truth: CalibrationTriple
    events: tuple[DriftEvent, ...] = ()
    noise: NoiseModel = NoiseModel()
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("scenario needs at least one frame")
        if loop_residual(self.ground_truth).rotation_deg > 1e-9 or loop_residual(self.ground_truth).translation_m > 1e-9:
            raise ValueError(
                "ground-truth triple violates the loop constraint; a physical rig "
                "cannot (derive lidar_radar from the camera pairs instead)"
            )
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.frame)))


def random_delta(bounds: MiscalRange, rng: np.random.Generator) -> RigidTransform:
    """Uniform per-axis perturbation within the bounds, rotation composed from
    per-axis Euler angles."""
    r, t = bounds.rotation_deg, bounds.translation_m
    roll, pitch, yaw = rng.uniform(-r, r, size=3)
    dx, dy, dz = rng.uniform(-t, t, size=3)
    return RigidTransform(
        UnitQuaternion.from_euler(EulerAngles(float(roll), float(pitch), float(yaw))),
        Translation3(float(dx), float(dy), float(dz)),
    )


def miscalibrate(
    gt: CalibrationTriple, d_lidar_cam: RigidTransform, d_radar_cam: RigidTransform
) -> tuple[CalibrationTriple, CalibrationTriple]:
    """Perturb the camera pairs by the given deltas and derive the third
    pair's delta from the loop constraint.

    Returns (initial triple, delta triple); the delta triple closes its own
    loop exactly by construction.
    """
    d_lidar_radar = d_radar_cam.compose(d_lidar_cam.inverse())
    init = CalibrationTriple(
        lidar_cam=d_lidar_cam.compose(gt.lidar_cam),
        radar_cam=d_radar_cam.compose(gt.radar_cam),
        lidar_radar=d_lidar_radar.compose(gt.lidar_radar),
    )
    return init, CalibrationTriple(d_lidar_cam, d_radar_cam, d_lidar_radar)


def compose_refinement_stages(
    stages: Sequence[CalibrationTriple], init: CalibrationTriple
) -> CalibrationTriple:
    """Collapse a cascade of per-stage corrections onto the initial triple.

    The camera pairs invert the left-to-right product of their stage
    corrections; the LiDAR-RADAR pair instead applies the last stage's
    correction to the transform the camera pairs imply after the previous
    stages (per-stage LiDAR-RADAR corrections close their loop only
    approximately, so they cannot be telescoped directly).

    Direction bookkeeping: ``init`` holds the calibrations the corrections
    were generated against (see :func:`miscalibrate`), and the returned
    ``lidar_radar`` slot is the camera-pair-implied loop combination
    ``lidar_cam^-1 * radar_cam``, the opposite sense from the per-stage
    correction slots.
    """
    if not stages:
        raise ValueError("need at least one refinement stage")

    def camera_pair(pair: str, upto: int) -> RigidTransform:
        product = stages[0].get(pair)
        for stage in stages[1:upto]:
            product = product.compose(stage.get(pair))
        return product.inverse().compose(init.get(pair))

    n = len(stages)
    if n == 1:
        prev_lidar_cam, prev_radar_cam = init.lidar_cam, init.radar_cam
    else:
        prev_lidar_cam = camera_pair("lidar_cam", n - 1)
        prev_radar_cam = camera_pair("radar_cam", n - 1)
    return CalibrationTriple(
        lidar_cam=camera_pair("lidar_cam", n),
        radar_cam=camera_pair("radar_cam", n),
        lidar_radar=stages[-1].lidar_radar.inverse().compose(prev_lidar_cam.inverse()).compose(prev_radar_cam),
    )


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    pair: str
    decision: str
    rot_estimate_deg: float
    trans_estimate_m: float
    event: str
    rot_true_deg: float
    trans_true_m: float


@dataclass(frozen=True)
class ScenarioSummary:
    frames: int
    update_events: int
    detection_latency: tuple[int | None, ...]  # per drift event, frames until update
    false_positives: int
    mean_rot_estimation_error_deg: float
    mean_trans_estimation_error_m: float

    def lines(self) -> list[str]:
        latencies = " ".join("none" if v is None else str(v) for v in self.detection_latency) or "-"
        return [
            f"frames={self.frames}",
            f"update_events={self.update_events}",
            f"detection_latency_frames={latencies}",
            f"false_positives={self.false_positives}",
            f"mean_rot_estimation_error_deg={self.mean_rot_estimation_error_deg:.9g}",
            f"mean_trans_estimation_error_m={self.mean_trans_estimation_error_m:.9g}",
        ]


FRAME_LOG_SCHEMA = "frame,pair,decision,rot_estimate_deg,trans_estimate_m,event,rot_true_deg,trans_true_m"


@dataclass(frozen=True)
class ScenarioResult:
    records: tuple[FrameRecord, ...]
    updates: tuple[tuple[int, UpdateEvent], ...]
    summary: ScenarioSummary

    def frame_log_csv(self) -> str:
        lines = ["# tricalib frame log v1", FRAME_LOG_SCHEMA]
        for r in self.records:
            lines.append(
                f"{r.frame},{r.pair},{r.decision},{r.rot_estimate_deg:.9g},"
                f"{r.trans_estimate_m:.9g},{r.event},{r.rot_true_deg:.9g},{r.trans_true_m:.9g}"
            )
        return "\n".join(lines) + "\n"


class _Mountings:
    """Per-sensor poses; pair transforms are derived, so drift in one sensor
    moves exactly the two pairs that involve it."""

    def __init__(self, gt: CalibrationTriple):
        self.poses = {
            "camera": RigidTransform.identity(),
            "lidar": gt.lidar_cam.inverse(),
            "radar": gt.radar_cam.inverse(),
        }
        self._triple = gt  # keep the exact input until a drift event lands

    def apply(self, event: DriftEvent) -> None:
        self.poses[event.sensor] = self.poses[event.sensor].compose(event.delta)
        lidar, radar, camera = self.poses["lidar"], self.poses["radar"], self.poses["camera"]
        self._triple = CalibrationTriple(
            lidar_cam=lidar.inverse().compose(camera),
            radar_cam=radar.inverse().compose(camera),
            lidar_radar=radar.inverse().compose(lidar),
        )

    def triple(self) -> CalibrationTriple:
        return self._triple


def run_scenario(
    scenario: DriftScenario,
    monitor_cfg: MonitorConfig = MonitorConfig(),
    mpn_cfg: MpnConfig | None = None,
    false_positive_horizon: int = 25,
) -> ScenarioResult:
    """Closed-loop run of predictor + optional refiner + monitor.

    Per frame: compute each pair's true correction (drifted truth against the
    monitor's live calibration), perturb it with pre-drawn noise, optionally
    refine the triple, feed the monitor, then apply the cross-pair update
    rule and any due drift events.
    """
    rng = np.random.default_rng(scenario.seed)
    noise = scenario.noise
    n = scenario.frames
    rot_noise = rng.normal(scale=noise.rot_sigma_deg, size=(n, 3, 3)) if noise.rot_sigma_deg else np.zeros((n, 3, 3))
    trans_noise = rng.normal(scale=noise.trans_sigma_m, size=(n, 3, 3)) if noise.trans_sigma_m else np.zeros((n, 3, 3))
    spikes = rng.uniform(size=(n, 3)) < noise.outlier_prob

    mountings = _Mountings(scenario.ground_truth)
    rig = RigMonitor(scenario.ground_truth, monitor_cfg)
    pending = list(scenario.events)

    records: list[FrameRecord] = []
    updates: list[tuple[int, UpdateEvent]] = []
    abs_rot_err = 0.0
    abs_trans_err = 0.0

    for frame in range(n):
        truth = mountings.triple()
        true_errors = {}
        predictions = {}
        for i, pair in enumerate(PAIR_NAMES):
            correction = truth.get(pair).compose(rig.pairs[pair].calibration.inverse())
            true_errors[pair] = correction
            scale = noise.outlier_scale if spikes[frame, i] else 1.0
            wobble = RigidTransform(
                UnitQuaternion.from_euler(
                    EulerAngles(*(float(v) * scale for v in rot_noise[frame, i]))
                ),
                Translation3(*(float(v) * scale for v in trans_noise[frame, i])),
            )
            predictions[pair] = wobble.compose(correction)

        if mpn_cfg is not None:
            refined = refine(CalibrationTriple(**predictions), mpn_cfg)
            predictions = {pair: refined.get(pair) for pair in PAIR_NAMES}

        results = rig.ingest(predictions)
        events = rig.check_calibration()
        updates.extend((frame, e) for e in events)
        touched = {e.pair for e in events}
        event_kind = {e.pair: ("update_loop" if e.via_loop_closure else "update_direct") for e in events}

        for pair in PAIR_NAMES:
            mon = rig.pairs[pair]
            rot_est = mon.rotation_deviation_deg()
            trans_est = mon.translation_deviation_m()
            rot_true = angular_distance_deg(true_errors[pair].rotation, UnitQuaternion.identity())
            trans_true = true_errors[pair].translation.norm()
            abs_rot_err += abs(rot_est - rot_true) if pair not in touched else 0.0
            abs_trans_err += abs(trans_est - trans_true) if pair not in touched else 0.0
            records.append(
                FrameRecord(
                    frame=frame,
                    pair=pair,
                    decision=results[pair].decision.value,
                    rot_estimate_deg=rot_est,
                    trans_estimate_m=trans_est,
                    event=event_kind.get(pair, ""),
                    rot_true_deg=rot_true,
                    trans_true_m=trans_true,
                )
            )

        while pending and pending[0].frame == frame:
            mountings.apply(pending.pop(0))

    latencies: list[int | None] = []
    for event in scenario.events:
        affected = set(pairs_involving(event.sensor))
        hit = next(
            (f for f, u in updates if f > event.frame and u.pair in affected),
            None,
        )
        latencies.append(None if hit is None else hit - event.frame)
    drift_frames = [e.frame for e in scenario.events]
    false_positives = sum(
        1
        for f, _ in updates
        if not any(df < f <= df + false_positive_horizon for df in drift_frames)
    )
    denom = max(1, 3 * n)
    summary = ScenarioSummary(
        frames=n,
        update_events=len(updates),
        detection_latency=tuple(latencies),
        false_positives=false_positives,
        mean_rot_estimation_error_deg=abs_rot_err / denom,
        mean_trans_estimation_error_m=abs_trans_err / denom,
    )
    return ScenarioResult(records=tuple(records), updates=tuple(updates), summary=summary)
