"""Point-cloud projection into camera images and bird's-eye-view grids.

Depth images store inverse depth (1/z) with 0 marking empty pixels; on pixel
collisions the nearer point wins. BEV grids store point height with NaN
marking empty cells; collisions keep the maximum height.

BEV mapping: a point (x, y, z) with x lateral and y longitudinal lands at
column ``scale_x * (x - lateral_min)`` and row ``scale_y * (longitudinal_max
- y)``, so the forward direction points up the image and the configured
ranges span the grid exactly. Equivalently column = scale_x * x + offset_x
with offset_x = -lateral_min * scale_x. (Offsets that divide the range by the
scale instead would not reproduce the documented 600x300 default grid; see
the package docs for the flagged discrepancy.)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .se3 import RigidTransform


@dataclass(frozen=True)
class PointCloud:
    """N x 3 array of (x, y, z) points in meters; may be empty."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"point cloud must be N x 3, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class DepthImage:
    """Inverse-depth grid: values are 1/z in 1/m, 0 where no point projected."""

    values: np.ndarray

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.values))

    def display_grid(self) -> np.ndarray:
        """Grid with empty pixels as NaN, for the graymap writer."""
        return np.where(self.values > 0.0, self.values, np.nan)


@dataclass(frozen=True)
class BevImage:
    """Top-down height grid in meters; NaN marks empty cells (0 m is a valid
    height, so 0 cannot be the sentinel)."""

    heights: np.ndarray

    def occupancy(self) -> np.ndarray:
        return ~np.isnan(self.heights)

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.occupancy()))


@dataclass(frozen=True)
class BevConfig:
    """Region of interest and pixel scale of the top-down grid.

    Defaults give a 600 x 300 grid at 0.1 m x 0.1 m per pixel.
    """

    lateral_range: tuple[float, float] = (-15.0, 15.0)
    longitudinal_range: tuple[float, float] = (0.0, 60.0)
    scale_x: float = 10.0  # pixels per meter, lateral
    scale_y: float = 10.0  # pixels per meter, longitudinal

    def __post_init__(self):
        if self.lateral_range[0] >= self.lateral_range[1]:
            raise ValueError(f"inverted lateral range {self.lateral_range}")
        if self.longitudinal_range[0] >= self.longitudinal_range[1]:
            raise ValueError(f"inverted longitudinal range {self.longitudinal_range}")
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValueError("scales must be positive")

    @property
    def width(self) -> int:
        return int(round((self.lateral_range[1] - self.lateral_range[0]) * self.scale_x))

    @property
    def height(self) -> int:
        return int(round((self.longitudinal_range[1] - self.longitudinal_range[0]) * self.scale_y))


def transform_cloud(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    """Apply R p + t to every point."""
    if len(cloud) == 0:
        return cloud
    r = t.rotation.to_rotation_matrix()
    offset = np.array(t.translation.as_tuple())
    return PointCloud(cloud.points @ r.T + offset)


def camera_to_bev_axes(cloud: PointCloud) -> PointCloud:
    """Remap a camera-frame cloud (x right, y down, z forward) to BEV axes
    (x lateral, y longitudinal, z height up)."""
    p = cloud.points
    return PointCloud(np.column_stack((p[:, 0], p[:, 2], -p[:, 1]))) if len(cloud) else cloud


def project_to_depth_image(cloud: PointCloud, k: CameraIntrinsics) -> DepthImage:
    """Project a camera-frame cloud through the pinhole model.

    Points behind the camera or outside the frame are dropped; colliding
    points keep the larger inverse depth (the nearer point).
    """
    img = np.zeros((k.height, k.width))
    if len(cloud) == 0:
        return DepthImage(img)
    p = cloud.points
    front = p[:, 2] > 0.0
    p = p[front]
    if p.shape[0] == 0:
        return DepthImage(img)
    inv_z = 1.0 / p[:, 2]
    u = np.floor(k.fx * p[:, 0] * inv_z + k.cx).astype(np.intp)
    v = np.floor(k.fy * p[:, 1] * inv_z + k.cy).astype(np.intp)
    inside = (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
    np.maximum.at(img, (v[inside], u[inside]), inv_z[inside])
    return DepthImage(img)


def rasterize_bev(cloud: PointCloud, cfg: BevConfig = BevConfig()) -> BevImage:
    """Rasterize a cloud into the top-down height grid.

    Points outside the configured lateral/longitudinal ranges are filtered
    out (range ends inclusive); colliding points keep the maximum height.
    """
    grid = np.full((cfg.height, cfg.width), np.nan)
    if len(cloud) == 0:
        return BevImage(grid)
    p = cloud.points
    lat_min, lat_max = cfg.lateral_range
    long_min, long_max = cfg.longitudinal_range
    keep = (p[:, 0] >= lat_min) & (p[:, 0] <= lat_max) & (p[:, 1] >= long_min) & (p[:, 1] <= long_max)
    p = p[keep]
    if p.shape[0] == 0:
        return BevImage(grid)
    col = np.floor(cfg.scale_x * (p[:, 0] - lat_min)).astype(np.intp)
    row = np.floor(cfg.scale_y * (long_max - p[:, 1])).astype(np.intp)
    # points exactly on the max edge land one past the last cell; fold them in
    np.clip(col, 0, cfg.width - 1, out=col)
    np.clip(row, 0, cfg.height - 1, out=row)
    np.fmax.at(grid, (row, col), p[:, 2])
    return BevImage(grid)


def read_cloud_text(path: str | Path) -> PointCloud:
    """Read whitespace-separated ``x y z`` lines; ``#`` starts a comment."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 coordinates, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric coordinate in {line!r}") from None
    return PointCloud(np.array(rows) if rows else np.empty((0, 3)))


def write_cloud_text(path: str | Path, cloud: PointCloud) -> None:
    lines = [" ".join(f"{c:.17g}" for c in row) for row in cloud.points]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_cloud_binary(path: str | Path) -> PointCloud:
    """Read the length-prefixed binary form: little-endian uint32 count,
    then count * 3 little-endian float64 coordinates."""
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise ValueError(f"{path}: truncated binary point cloud")
    (count,) = struct.unpack_from("<I", blob)
    expected = 4 + count * 24
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {count} points, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", offset=4).reshape(count, 3)
    return PointCloud(data.copy())


def write_cloud_binary(path: str | Path, cloud: PointCloud) -> None:
    blob = struct.pack("<I", len(cloud)) + cloud.points.astype("<f8").tobytes()
    Path(path).write_bytes(blob)


def read_cloud(path: str | Path) -> PointCloud:
    """Read either supported cloud format, sniffing by the binary size rule."""
    blob = Path(path).read_bytes()
    if len(blob) >= 4:
        (count,) = struct.unpack_from("<I", blob)
        if len(blob) == 4 + count * 24:
            return read_cloud_binary(path)
    return read_cloud_text(path)


def write_pgm(path: str | Path, grid: np.ndarray, max_gray: int = 65535) -> None:
    """Write a 2-D grid as a plain (P2) portable graymap for inspection.

    Finite values are scaled linearly onto 1..max_gray; NaN marks empty cells
    and maps to 0 (``DepthImage.display_grid`` / ``BevImage.heights`` are
    already in that form).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2:
        raise ValueError("graymap output needs a 2-D grid")
    filled = np.isfinite(grid)
    out = np.zeros(grid.shape, dtype=np.int64)
    if np.any(filled):
        lo = float(grid[filled].min())
        hi = float(grid[filled].max())
        span = hi - lo
        if span <= 0.0:
            out[filled] = max_gray
        else:
            out[filled] = 1 + np.round((grid[filled] - lo) / span * (max_gray - 1)).astype(np.int64)
    h, w = grid.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in out)
    Path(path).write_text(f"P2\n{w} {h}\n{max_gray}\n{body}\n")
