"""Correlation cost volumes between feature grids, and feature fusion.

Matching two sensors' feature maps means scoring, for every pixel, how well
its feature vector correlates with the candidate pixels within a displacement
radius in the other map. The scores form a (2d+1)^2 x H x W volume whose
channel layout is row-major over the displacement offsets (dy, dx) in
[-d, d]^2; displaced pixels outside the grid score 0.

The volume builder is the package's one hot loop. A compiled kernel is used
when the optional extension built, with a numpy fallback selected at import;
``backend_names()`` reports what is available and ``build_cost_volume``
accepts an explicit ``backend=`` for benchmarking one against the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _costvol_py

_BACKENDS = {"pure": _costvol_py.cost_volume}
try:
    from . import _costvol_c

    _BACKENDS["compiled"] = _costvol_c.cost_volume
    DEFAULT_BACKEND = "compiled"
except ImportError:
    DEFAULT_BACKEND = "pure"


def backend_names() -> tuple[str, ...]:
    """Available kernel backends, fallback first."""
    return tuple(_BACKENDS)


@dataclass(frozen=True)
class FeatureGrid:
    """Dense C x H x W feature map."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.ndim != 3 or min(v.shape) < 1:
            raise ValueError(f"feature grid must be C x H x W with positive dims, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature grid contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @classmethod
    def from_text(cls, path: str | Path) -> "FeatureGrid":
        """Load from a text file: header line ``C H W`` then C*H*W values."""
        tokens = Path(path).read_text().split()
        if len(tokens) < 3:
            raise ValueError(f"{path}: missing C H W header")
        c, h, w = (int(t) for t in tokens[:3])
        values = np.array([float(t) for t in tokens[3:]])
        if values.size != c * h * w:
            raise ValueError(f"{path}: header promises {c * h * w} values, found {values.size}")
        return cls(values.reshape(c, h, w))

    def to_text(self, path: str | Path) -> None:
        c, h, w = self.shape
        body = " ".join(f"{v:.17g}" for v in self.values.reshape(-1))
        Path(path).write_text(f"{c} {h} {w}\n{body}\n")


@dataclass(frozen=True)
class CostVolume:
    """Displacement-channel correlation scores, D x H x W.

    D is (2r+1)^2 for a single-modality volume and an integer multiple of it
    after channel concatenation.
    """

    values: np.ndarray
    radius: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ValueError(f"cost volume must be D x H x W, got shape {v.shape}")
        if self.radius < 0:
            raise ValueError("displacement radius must be non-negative")
        block = (2 * self.radius + 1) ** 2
        if v.shape[0] == 0 or v.shape[0] % block != 0:
            raise ValueError(f"channel count {v.shape[0]} is not a multiple of (2r+1)^2 = {block}")
        if not np.all(np.isfinite(v)):
            raise ValueError("cost volume contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def _check_same_shape(a: FeatureGrid, b: FeatureGrid) -> None:
    if a.shape != b.shape:
        raise ValueError(f"feature grids must share C x H x W, got {a.shape} vs {b.shape}")


def correlation_cost(a: FeatureGrid, b: FeatureGrid, p1: tuple[int, int], p2: tuple[int, int]) -> float:
    """Correlation between pixel p1 of ``a`` and pixel p2 of ``b``: the dot
    product of their feature vectors divided by the feature length C."""
    _check_same_shape(a, b)
    c, h, w = a.shape
    for name, (y, x) in (("p1", p1), ("p2", p2)):
        if not (0 <= y < h and 0 <= x < w):
            raise ValueError(f"{name}={y, x} outside {h} x {w} grid")
    return float(a.values[:, p1[0], p1[1]] @ b.values[:, p2[0], p2[1]]) / c


def build_cost_volume(a: FeatureGrid, b: FeatureGrid, d: int, backend: str | None = None) -> CostVolume:
    """Correlate every pixel of ``a`` against its (2d+1)^2 neighbourhood in ``b``."""
    _check_same_shape(a, b)
    if d < 0:
        raise ValueError("displacement radius must be non-negative")
    name = backend or DEFAULT_BACKEND
    try:
        kernel = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {backend_names()}") from None
    return CostVolume(kernel(a.values, b.values, d), radius=d)


def concat_bev_volume(proj: CostVolume, bev: CostVolume) -> CostVolume:
    """Stack a projection-image volume and a BEV volume along channels,
    projection channels first."""
    if proj.radius != bev.radius or proj.shape[1:] != bev.shape[1:]:
        raise ValueError(
            f"volumes must share radius and H x W, got r={proj.radius}/{bev.radius}, "
            f"{proj.shape[1:]} vs {bev.shape[1:]}"
        )
    return CostVolume(np.concatenate((proj.values, bev.values), axis=0), radius=proj.radius)


def flatten_volume(cv: CostVolume) -> np.ndarray:
    """Raster-order 1-D view of a volume, the deterministic stand-in for a
    learned projection to a fixed-size vector."""
    return cv.values.reshape(-1).copy()


@dataclass(frozen=True)
class SoftMaskParams:
    """Per-branch elementwise weights in [0, 1], one mask per sensor pair."""

    mask_lidar_cam: np.ndarray
    mask_radar_cam: np.ndarray
    mask_lidar_radar: np.ndarray

    def __post_init__(self):
        masks = {}
        length = None
        for name in ("mask_lidar_cam", "mask_radar_cam", "mask_lidar_radar"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 1:
                raise ValueError(f"{name} must be 1-D")
            if length is None:
                length = m.size
            elif m.size != length:
                raise ValueError("all masks must have equal length")
            if np.any(m < 0.0) or np.any(m > 1.0):
                raise ValueError(f"{name} has entries outside [0, 1]")
            masks[name] = m
        for name, m in masks.items():
            object.__setattr__(self, name, m)


def fuse_direct(f_lidar_cam: np.ndarray, f_radar_cam: np.ndarray, f_lidar_radar: np.ndarray) -> np.ndarray:
    """Concatenate the three per-pair feature vectors (in that fixed order)."""
    vecs = [np.asarray(v, dtype=float) for v in (f_lidar_cam, f_radar_cam, f_lidar_radar)]
    sizes = {v.size for v in vecs}
    if any(v.ndim != 1 for v in vecs) or len(sizes) != 1:
        raise ValueError("branch feature vectors must be 1-D and equally long")
    return np.concatenate(vecs)


def fuse_soft(g: np.ndarray, masks: SoftMaskParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reweight the fused vector elementwise, once per output branch."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or masks.mask_lidar_cam.size != g.size:
        raise ValueError(f"mask length {masks.mask_lidar_cam.size} != feature length {g.size}")
    return (masks.mask_lidar_cam * g, masks.mask_radar_cam * g, masks.mask_lidar_radar * g)
