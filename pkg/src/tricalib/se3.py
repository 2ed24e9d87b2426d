"""Quaternion and rigid-transform algebra shared by every tricalib module.

Conventions:
    * Quaternions are stored w-first and kept unit-norm; q and -q describe the
      same rotation, so the sign is canonicalized to w >= 0 on construction.
    * ``a.compose(b)`` applies ``b`` first, then ``a`` (matrix product order).
    * Transforms are stored as quaternion + vector and converted to 4x4
      homogeneous matrices only at serialization boundaries, which avoids the
      renormalization drift of chained matrix products.
    * Euler angles are intrinsic Z-Y-X (yaw, then pitch, then roll), degrees.

All types are immutable value types and all operations are pure functions, so
instances can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_SLERP_LINEAR_CUTOFF_RAD = 1e-7


@dataclass(frozen=True, slots=True)
class UnitQuaternion:
    """Unit rotation quaternion, w-first, canonical sign w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if n < 1e-12 or not math.isfinite(n):
            raise ValueError(f"cannot normalize quaternion with norm {n}")
        inv = 1.0 / n
        if self.w < 0.0:
            inv = -inv
        object.__setattr__(self, "w", self.w * inv)
        object.__setattr__(self, "x", self.x * inv)
        object.__setattr__(self, "y", self.y * inv)
        object.__setattr__(self, "z", self.z * inv)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle_deg: float) -> "UnitQuaternion":
        ax, ay, az = float(axis[0]), float(axis[1]), float(axis[2])
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n < 1e-12:
            raise ValueError("rotation axis must be nonzero")
        half = math.radians(angle_deg) * 0.5
        s = math.sin(half) / n
        return cls(math.cos(half), ax * s, ay * s, az * s)

    @classmethod
    def from_euler(cls, e: "EulerAngles") -> "UnitQuaternion":
        """Intrinsic Z-Y-X: yaw about Z, then pitch about Y, then roll about X."""
        qz = cls.from_axis_angle((0.0, 0.0, 1.0), e.yaw)
        qy = cls.from_axis_angle((0.0, 1.0, 0.0), e.pitch)
        qx = cls.from_axis_angle((1.0, 0.0, 0.0), e.roll)
        return qz.multiply(qy).multiply(qx)

    def multiply(self, o: "UnitQuaternion") -> "UnitQuaternion":
        """Hamilton product self * o (o applied first)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = o.w, o.x, o.y, o.z
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def dot(self, o: "UnitQuaternion") -> float:
        return self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z

    def rotate(self, v: "Translation3") -> "Translation3":
        # v' = v + 2*w*(q_vec x v) + 2*(q_vec x (q_vec x v))
        tx = 2.0 * (self.y * v.z - self.z * v.y)
        ty = 2.0 * (self.z * v.x - self.x * v.z)
        tz = 2.0 * (self.x * v.y - self.y * v.x)
        return Translation3(
            v.x + self.w * tx + self.y * tz - self.z * ty,
            v.y + self.w * ty + self.z * tx - self.x * tz,
            v.z + self.w * tz + self.x * ty - self.y * tx,
        )

    def to_euler(self) -> "EulerAngles":
        """Decompose into intrinsic Z-Y-X angles (degrees)."""
        w, x, y, z = self.w, self.x, self.y, self.z
        sin_pitch = 2.0 * (w * y - x * z)
        if sin_pitch >= 1.0 - 1e-12:
            # gimbal lock looking up: only roll - yaw is observable
            return EulerAngles(0.0, 90.0, math.degrees(-math.atan2(2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z))))
        if sin_pitch <= -1.0 + 1e-12:
            return EulerAngles(0.0, -90.0, math.degrees(math.atan2(2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z))))
        roll = math.atan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y))
        pitch = math.asin(sin_pitch)
        yaw = math.atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z))
        return EulerAngles(math.degrees(roll), math.degrees(pitch), math.degrees(yaw))

    def to_rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ]
        )

    @classmethod
    def from_rotation_matrix(cls, m: np.ndarray) -> "UnitQuaternion":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected 3x3 rotation matrix, got shape {m.shape}")
        if not np.allclose(m.T @ m, np.eye(3), atol=1e-6) or np.linalg.det(m) < 0.0:
            raise ValueError("matrix is not a proper rotation")
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            return cls((0.25 * s), (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
        if m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            return cls((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
        if m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            return cls((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        return cls((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)


@dataclass(frozen=True, slots=True)
class Translation3:
    """Translation vector in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"translation components must be finite, got ({self.x}, {self.y}, {self.z})")

    @classmethod
    def zero(cls) -> "Translation3":
        return cls(0.0, 0.0, 0.0)

    def add(self, o: "Translation3") -> "Translation3":
        return Translation3(self.x + o.x, self.y + o.y, self.z + o.z)

    def sub(self, o: "Translation3") -> "Translation3":
        return Translation3(self.x - o.x, self.y - o.y, self.z - o.z)

    def scaled(self, k: float) -> "Translation3":
        return Translation3(self.x * k, self.y * k, self.z * k)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True, slots=True)
class EulerAngles:
    """Intrinsic Z-Y-X angles in degrees (applied yaw, pitch, roll)."""

    roll: float
    pitch: float
    yaw: float


@dataclass(frozen=True, slots=True)
class RigidTransform:
    """Rigid motion: rotate then translate (p' = R p + t)."""

    rotation: UnitQuaternion
    translation: Translation3

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(UnitQuaternion.identity(), Translation3.zero())

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self * other: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation.multiply(other.rotation),
            self.rotation.rotate(other.translation).add(self.translation),
        )

    def inverse(self) -> "RigidTransform":
        rot = self.rotation.conjugate()
        return RigidTransform(rot, rot.rotate(self.translation).scaled(-1.0))

    def apply(self, p: Translation3) -> Translation3:
        return self.rotation.rotate(p).add(self.translation)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.to_rotation_matrix()
        m[:3, 3] = (self.translation.x, self.translation.y, self.translation.z)
        return m

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 homogeneous matrix, got shape {m.shape}")
        if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), atol=1e-9):
            raise ValueError("last row of a homogeneous matrix must be 0 0 0 1")
        return cls(
            UnitQuaternion.from_rotation_matrix(m[:3, :3]),
            Translation3(float(m[0, 3]), float(m[1, 3]), float(m[2, 3])),
        )


def angular_distance_deg(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Geodesic rotation angle between two orientations, degrees in [0, 180].

    Equal to 2*acos(|<a, b>|) but evaluated through the relative rotation and
    atan2, which keeps full precision for near-identical rotations.
    """
    r = a.conjugate().multiply(b)
    vec = math.sqrt(r.x * r.x + r.y * r.y + r.z * r.z)
    return math.degrees(2.0 * math.atan2(vec, abs(r.w)))


def slerp(a: UnitQuaternion, b: UnitQuaternion, p: float) -> UnitQuaternion:
    """Spherical linear interpolation from ``a`` (p=0) to ``b`` (p=1).

    Interpolates along the shortest arc; below an arc angle of 1e-7 rad the
    sine ratios degenerate and the symmetric linear form is used instead.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"interpolation parameter must be in [0, 1], got {p}")
    d = a.dot(b)
    bw, bx, by, bz = b.w, b.x, b.y, b.z
    if d < 0.0:  # q and -q are the same rotation; take the short way round
        d = -d
        bw, bx, by, bz = -bw, -bx, -by, -bz
    theta = math.acos(min(d, 1.0))
    if theta < _SLERP_LINEAR_CUTOFF_RAD:
        ka, kb = 1.0 - p, p
    else:
        s = math.sin(theta)
        ka = math.sin((1.0 - p) * theta) / s
        kb = math.sin(p * theta) / s
    return UnitQuaternion(
        ka * a.w + kb * bw,
        ka * a.x + kb * bx,
        ka * a.y + kb * by,
        ka * a.z + kb * bz,
    )


def format_transform(t: RigidTransform) -> str:
    """Render as the 7-number text record ``qw qx qy qz tx ty tz``."""
    q, v = t.rotation, t.translation
    return " ".join(f"{c:.17g}" for c in (q.w, q.x, q.y, q.z, v.x, v.y, v.z))


def parse_transform(text: str) -> RigidTransform:
    """Parse a transform record: 7 numbers (quaternion + vector) or 16 numbers
    (row-major 4x4 homogeneous matrix). Both forms are accepted everywhere."""
    try:
        values = [float(tok) for tok in text.split()]
    except ValueError as exc:
        raise ValueError(f"transform record contains a non-numeric token: {exc}") from None
    if len(values) == 7:
        return RigidTransform(
            UnitQuaternion(values[0], values[1], values[2], values[3]),
            Translation3(values[4], values[5], values[6]),
        )
    if len(values) == 16:
        return RigidTransform.from_matrix(np.array(values).reshape(4, 4))
    raise ValueError(f"transform record needs 7 or 16 numbers, got {len(values)}")
