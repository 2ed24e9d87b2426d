"""Online calibration monitoring for the three sensor pairs.

Each pair runs an independent monitor over the stream of per-frame error
predictions (small rigid transforms, identity meaning "calibration is
correct"). The monitor keeps a decay-weighted moving window, filters isolated
outliers with a one-slot buffer, and exposes smoothed rotation/translation
error estimates. A cross-pair rule then localizes which sensor actually
drifted and updates the live calibrations, deriving the third pair's
correction from the loop-closure constraint so the rig stays consistent.

Outlier filtering runs in three phases per prediction:
  1. consistent with the newest window entry (rotation and translation checks
     both within their thresholds) -> accepted; otherwise parked in the buffer;
  2. next prediction consistent with the buffered one -> both accepted in
     arrival order, so a genuine step change enters after exactly two frames;
  3. otherwise the buffered prediction is discarded as an outlier and the new
     one is checked against the window again, entering or replacing it in the
     buffer.

Each monitor is single-writer: ingest and update calls for one pair must be
externally serialized; estimate reads between writes are safe, and the
cross-pair update runs on a consistent snapshot of all three monitors.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .refiner import PAIR_NAMES, CalibrationTriple, loop_messages
from .se3 import RigidTransform, Translation3, UnitQuaternion, angular_distance_deg, format_transform, slerp

logger = logging.getLogger(__name__)

PAIR_SENSORS = {
    "lidar_cam": frozenset({"lidar", "camera"}),
    "radar_cam": frozenset({"radar", "camera"}),
    "lidar_radar": frozenset({"lidar", "radar"}),
}


def pairs_involving(sensor: str) -> tuple[str, ...]:
    return tuple(p for p in PAIR_NAMES if sensor in PAIR_SENSORS[p])


@dataclass(frozen=True)
class MonitorConfig:
    """Window, decay, and threshold settings.

    Defaults: window 12, decay 0.65, consistency thresholds 0.05 deg and
    1.0 cm, recalibration thresholds likewise 0.05 deg and 1.0 cm.
    """

    window: int = 12
    decay: float = 0.65
    tau_r_deg: float = 0.05
    tau_t_m: float = 0.01
    tau_cal_r_deg: float = 0.05
    tau_cal_t_m: float = 0.01

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window length must be at least 1")
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f"decay must be in (0, 1), got {self.decay}")
        for name in ("tau_r_deg", "tau_t_m", "tau_cal_r_deg", "tau_cal_t_m"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


def normalized_weights(cfg: MonitorConfig, n: int) -> list[float]:
    """Decay weights for the n newest entries: decay^k, normalized to sum 1,
    newest (k = 0) first."""
    if not 1 <= n <= cfg.window:
        raise ValueError(f"entry count must be in [1, {cfg.window}], got {n}")
    raw = [cfg.decay**k for k in range(n)]
    total = sum(raw)
    return [w / total for w in raw]


def translation_average(entries: Sequence[Translation3], cfg: MonitorConfig) -> Translation3 | None:
    """Decay-weighted mean of the translations, newest first; None when empty."""
    if not entries:
        return None
    weights = normalized_weights(cfg, len(entries))
    x = y = z = 0.0
    for w, t in zip(weights, entries):
        x += w * t.x
        y += w * t.y
        z += w * t.z
    return Translation3(x, y, z)


def weighted_quaternion_average(quats: Sequence[UnitQuaternion], weights: Sequence[float]) -> UnitQuaternion:
    """Fold the window with SLERP: start at the newest rotation and pull
    toward each older one by its normalized weight, in age order."""
    if len(weights) != len(quats):
        raise ValueError("need one weight per quaternion")
    acc = quats[0]
    for k in range(1, len(quats)):
        acc = slerp(acc, quats[k], weights[k])
    return acc


def quaternion_average(entries: Sequence[UnitQuaternion], cfg: MonitorConfig) -> UnitQuaternion | None:
    """Iterated-SLERP decay-weighted mean, newest first; None when empty."""
    if not entries:
        return None
    return weighted_quaternion_average(entries, normalized_weights(cfg, len(entries)))


class Decision(Enum):
    """Outcome of ingesting one prediction."""

    ACCEPTED = "accepted"
    BUFFERED = "buffered"
    OUTLIER_DISCARDED = "outlier_discarded"


@dataclass(frozen=True)
class IngestResult:
    decision: Decision
    discarded: RigidTransform | None = None
    inserted: int = 0  # window entries added by this call (0, 1 or 2)


@dataclass(frozen=True)
class UpdateEvent:
    """One live-calibration change, directly triggered or loop-derived."""

    pair: str
    trigger: str  # "rotation" or "translation"
    old_calibration: RigidTransform
    new_calibration: RigidTransform
    held_pair: str
    derived_pair: str
    via_loop_closure: bool

    def log_line(self, frame: int | None = None) -> str:
        fields = [] if frame is None else [f"frame={frame}"]
        fields += [
            f"pair={self.pair}",
            f"trigger={self.trigger}",
            f"held={self.held_pair}",
            f"derived={self.derived_pair}",
            f"via_loop={'yes' if self.via_loop_closure else 'no'}",
            "old=" + ",".join(format_transform(self.old_calibration).split()),
            "new=" + ",".join(format_transform(self.new_calibration).split()),
        ]
        return " ".join(fields)


class PairMonitor:
    """Moving window, outlier buffer, and live calibration of one sensor pair."""

    def __init__(self, pair: str, calibration: RigidTransform, cfg: MonitorConfig):
        if pair not in PAIR_NAMES:
            raise ValueError(f"unknown sensor pair {pair!r}")
        self.pair = pair
        self.cfg = cfg
        self.calibration = calibration
        self.window: deque[RigidTransform] = deque(maxlen=cfg.window)  # newest first
        self.buffer: RigidTransform | None = None
        self.buffered_phase = False
        self.rotation_estimate = UnitQuaternion.identity()
        self.translation_estimate = Translation3.zero()
        self.reset_window()

    def reset_window(self) -> None:
        """Fill the window with identity predictions and clear the buffer, so
        the estimates read exactly zero error and the next prediction has a
        comparison partner."""
        self.window.clear()
        identity = RigidTransform.identity()
        for _ in range(self.cfg.window):
            self.window.appendleft(identity)
        self.buffer = None
        self.buffered_phase = False
        self._recompute()

    def _consistent(self, a: RigidTransform, b: RigidTransform) -> bool:
        if angular_distance_deg(a.rotation, b.rotation) > self.cfg.tau_r_deg:
            return False
        return a.translation.sub(b.translation).norm() <= self.cfg.tau_t_m

    def _insert(self, pred: RigidTransform) -> None:
        self.window.appendleft(pred)

    def _recompute(self) -> None:
        weights = normalized_weights(self.cfg, len(self.window))
        rotations = [t.rotation for t in self.window]
        self.rotation_estimate = weighted_quaternion_average(rotations, weights)
        x = y = z = 0.0
        for w, t in zip(weights, self.window):
            x += w * t.translation.x
            y += w * t.translation.y
            z += w * t.translation.z
        self.translation_estimate = Translation3(x, y, z)

    def ingest(self, pred: RigidTransform) -> IngestResult:
        if not self.buffered_phase:
            if self._consistent(pred, self.window[0]):
                self._insert(pred)
                self._recompute()
                return IngestResult(Decision.ACCEPTED, inserted=1)
            self.buffer = pred
            self.buffered_phase = True
            return IngestResult(Decision.BUFFERED)

        held = self.buffer
        assert held is not None
        if self._consistent(pred, held):
            self._insert(held)
            self._insert(pred)
            self._recompute()
            self.buffer = None
            self.buffered_phase = False
            return IngestResult(Decision.ACCEPTED, inserted=2)

        # buffered prediction was an isolated outlier; re-run the window check
        self.buffer = None
        self.buffered_phase = False
        if self._consistent(pred, self.window[0]):
            self._insert(pred)
            self._recompute()
            return IngestResult(Decision.OUTLIER_DISCARDED, discarded=held, inserted=1)
        self.buffer = pred
        self.buffered_phase = True
        return IngestResult(Decision.OUTLIER_DISCARDED, discarded=held)

    def estimate_transform(self) -> RigidTransform:
        return RigidTransform(self.rotation_estimate, self.translation_estimate)

    def rotation_deviation_deg(self) -> float:
        return angular_distance_deg(self.rotation_estimate, UnitQuaternion.identity())

    def translation_deviation_m(self) -> float:
        return self.translation_estimate.norm()


def maybe_update_calibration(monitors: Mapping[str, PairMonitor], cfg: MonitorConfig) -> list[UpdateEvent]:
    """Cross-pair drift localization and calibration update.

    When every pair's rotation estimate is quiet, the decision runs on the
    translation estimates; otherwise rotation decides (it is the less noisy
    component). The triggering pair updates directly with its estimated
    correction; of the remaining two, the quieter keeps its calibration and
    the other is corrected with the transform the loop constraint implies
    from the two trusted branches. Updated pairs get their windows reset to
    identity.
    """
    if set(monitors) != set(PAIR_NAMES):
        raise ValueError(f"need monitors for exactly {PAIR_NAMES}")
    rot_dev = {p: monitors[p].rotation_deviation_deg() for p in PAIR_NAMES}
    trans_dev = {p: monitors[p].translation_deviation_m() for p in PAIR_NAMES}

    if all(rot_dev[p] < cfg.tau_cal_r_deg for p in PAIR_NAMES):
        exceeding = [p for p in PAIR_NAMES if trans_dev[p] >= cfg.tau_cal_t_m]
        deviation = trans_dev
        trigger = "translation"
    else:
        exceeding = [p for p in PAIR_NAMES if rot_dev[p] >= cfg.tau_cal_r_deg]
        deviation = rot_dev
        trigger = "rotation"
    if not exceeding:
        return []
    if len(exceeding) == 3:
        # localization assumes one quiet pair; simultaneous multi-sensor
        # drift breaks that assumption, handled by the same rule but flagged
        logger.warning("all three pairs exceed the %s recalibration threshold", trigger)

    updated = max(exceeding, key=lambda p: deviation[p])
    rest = [p for p in PAIR_NAMES if p != updated]
    held = min(rest, key=lambda p: deviation[p])
    derived = rest[0] if rest[1] == held else rest[1]

    # the trusted branches are the trigger (corrected by its estimate) and the
    # held pair (kept); the third calibration is whatever closes their loop,
    # which keeps the post-update rig exactly consistent
    new_updated = monitors[updated].estimate_transform().compose(monitors[updated].calibration)
    post = {updated: new_updated, held: monitors[held].calibration, derived: RigidTransform.identity()}
    new_derived = loop_messages(CalibrationTriple(**post)).get(derived)

    events = []
    for pair, new, via_loop in ((updated, new_updated, False), (derived, new_derived, True)):
        mon = monitors[pair]
        old = mon.calibration
        mon.calibration = new
        mon.reset_window()
        events.append(
            UpdateEvent(
                pair=pair,
                trigger=trigger,
                old_calibration=old,
                new_calibration=new,
                held_pair=held,
                derived_pair=derived,
                via_loop_closure=via_loop,
            )
        )
    return events


class RigMonitor:
    """The three pair monitors plus the cross-pair update rule."""

    def __init__(self, initial: CalibrationTriple, cfg: MonitorConfig = MonitorConfig()):
        self.cfg = cfg
        self.pairs = {p: PairMonitor(p, initial.get(p), cfg) for p in PAIR_NAMES}

    def ingest(self, predictions: Mapping[str, RigidTransform]) -> dict[str, IngestResult]:
        return {p: self.pairs[p].ingest(predictions[p]) for p in PAIR_NAMES}

    def check_calibration(self) -> list[UpdateEvent]:
        return maybe_update_calibration(self.pairs, self.cfg)

    def calibrations(self) -> CalibrationTriple:
        return CalibrationTriple(**{p: self.pairs[p].calibration for p in PAIR_NAMES})


def write_event_log(path: str | Path, events: Iterable[tuple[int, UpdateEvent]]) -> None:
    """Structured event log: one ``key=value`` record per line."""
    lines = [event.log_line(frame) for frame, event in events]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
