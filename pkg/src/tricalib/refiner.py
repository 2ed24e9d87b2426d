"""Message-passing refinement of the three pairwise sensor transforms.

The three extrinsic transforms of a LiDAR/RADAR/camera rig are mutually
constrained: composing any two must reproduce the third. Independent per-pair
estimates generally violate that closed-loop constraint. This module treats the
three transforms as nodes of a fully connected triangle; each node receives the
transform its two neighbours imply for it and blends it into its own estimate,
shrinking the loop residual with every sweep.

Updates are synchronous: all messages are computed from the pre-update state,
then every node blends at once. Blending is SLERP on the rotation (weight
``alpha`` on the current node) and linear interpolation on the translation,
which keeps every iterate a valid rigid transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .se3 import RigidTransform, angular_distance_deg, format_transform, parse_transform, slerp

PAIR_NAMES = ("lidar_cam", "radar_cam", "lidar_radar")


@dataclass(frozen=True, slots=True)
class CalibrationTriple:
    """The three pairwise transforms treated as one loop-constrained unit.

    Consistency means ``lidar_radar == radar_cam * lidar_cam^-1``.
    """

    lidar_cam: RigidTransform
    radar_cam: RigidTransform
    lidar_radar: RigidTransform

    @classmethod
    def identity(cls) -> "CalibrationTriple":
        return cls(RigidTransform.identity(), RigidTransform.identity(), RigidTransform.identity())

    @classmethod
    def from_camera_pairs(cls, lidar_cam: RigidTransform, radar_cam: RigidTransform) -> "CalibrationTriple":
        """Build a loop-consistent triple from the two camera pairs."""
        return cls(lidar_cam, radar_cam, radar_cam.compose(lidar_cam.inverse()))

    def get(self, pair: str) -> RigidTransform:
        if pair not in PAIR_NAMES:
            raise KeyError(f"unknown sensor pair {pair!r}")
        return getattr(self, pair)

    def replace(self, pair: str, value: RigidTransform) -> "CalibrationTriple":
        if pair not in PAIR_NAMES:
            raise KeyError(f"unknown sensor pair {pair!r}")
        parts = {name: getattr(self, name) for name in PAIR_NAMES}
        parts[pair] = value
        return CalibrationTriple(**parts)

    def items(self) -> Iterator[tuple[str, RigidTransform]]:
        return iter((name, getattr(self, name)) for name in PAIR_NAMES)


@dataclass(frozen=True, slots=True)
class MpnConfig:
    """Iteration schedule for the refinement sweep."""

    iterations: int = 4
    alphas: tuple[float, ...] = (0.5, 0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iteration count must be non-negative")
        if len(self.alphas) != self.iterations:
            raise ValueError(f"need one blend weight per iteration: {len(self.alphas)} != {self.iterations}")
        for a in self.alphas:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"blend weight must be in [0, 1], got {a}")


@dataclass(frozen=True, slots=True)
class LoopResidual:
    """How far a triple is from closing its loop."""

    rotation_deg: float
    translation_m: float


def loop_messages(x: CalibrationTriple) -> CalibrationTriple:
    """Per-node expected transform implied by the other two nodes."""
    return CalibrationTriple(
        lidar_cam=x.lidar_radar.inverse().compose(x.radar_cam),
        radar_cam=x.lidar_radar.compose(x.lidar_cam),
        lidar_radar=x.radar_cam.compose(x.lidar_cam.inverse()),
    )


def blend_transforms(node: RigidTransform, message: RigidTransform, alpha: float) -> RigidTransform:
    """Keep fraction ``alpha`` of the node, take ``1 - alpha`` of the message."""
    return RigidTransform(
        slerp(message.rotation, node.rotation, alpha),
        node.translation.scaled(alpha).add(message.translation.scaled(1.0 - alpha)),
    )


def node_update(x: CalibrationTriple, m: CalibrationTriple, alpha: float) -> CalibrationTriple:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"blend weight must be in [0, 1], got {alpha}")
    return CalibrationTriple(
        lidar_cam=blend_transforms(x.lidar_cam, m.lidar_cam, alpha),
        radar_cam=blend_transforms(x.radar_cam, m.radar_cam, alpha),
        lidar_radar=blend_transforms(x.lidar_radar, m.lidar_radar, alpha),
    )


def refine(x: CalibrationTriple, cfg: MpnConfig = MpnConfig()) -> CalibrationTriple:
    """Run the configured number of synchronous message/blend sweeps."""
    for alpha in cfg.alphas:
        x = node_update(x, loop_messages(x), alpha)
    return x


def refine_with_history(x: CalibrationTriple, cfg: MpnConfig = MpnConfig()) -> tuple[CalibrationTriple, list[LoopResidual]]:
    """Like :func:`refine` but also returns the residual before each iteration
    and after the last one (length ``iterations + 1``)."""
    history = [loop_residual(x)]
    for alpha in cfg.alphas:
        x = node_update(x, loop_messages(x), alpha)
        history.append(loop_residual(x))
    return x, history


def loop_residual(x: CalibrationTriple) -> LoopResidual:
    """Residual of ``radar_cam * lidar_cam^-1`` against ``lidar_radar``."""
    implied = x.radar_cam.compose(x.lidar_cam.inverse())
    return LoopResidual(
        rotation_deg=angular_distance_deg(implied.rotation, x.lidar_radar.rotation),
        translation_m=implied.translation.sub(x.lidar_radar.translation).norm(),
    )


def read_triple(path: str | Path) -> CalibrationTriple:
    """Read a triple file: three transform records (7 or 16 numbers each) in
    the order lidar_cam, radar_cam, lidar_radar; ``#`` starts a comment."""
    records = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            records.append(parse_transform(line))
    if len(records) != 3:
        raise ValueError(f"{path}: expected 3 transform records, found {len(records)}")
    return CalibrationTriple(*records)


def write_triple(path: str | Path, triple: CalibrationTriple, header: Iterable[str] = ()) -> None:
    lines = [f"# {h}" for h in header]
    lines += [format_transform(t) for _, t in triple.items()]
    Path(path).write_text("\n".join(lines) + "\n")
