"""Pure-numpy cost-volume kernel, the fallback when the compiled one is absent."""

import numpy as np


def cost_volume(a: np.ndarray, b: np.ndarray, radius: int) -> np.ndarray:
    """Correlation volume between two C x H x W grids.

    Output channel (dy + r) * (2r + 1) + (dx + r) holds, per pixel (y, x),
    the feature dot product a[:, y, x] . b[:, y+dy, x+dx] / C, with 0 where
    the displaced pixel falls outside the grid.
    """
    c, h, w = a.shape
    side = 2 * radius + 1
    out = np.zeros((side * side, h, w))
    for dy in range(-radius, radius + 1):
        y0, y1 = max(0, -dy), min(h, h - dy)
        for dx in range(-radius, radius + 1):
            x0, x1 = max(0, -dx), min(w, w - dx)
            if y0 >= y1 or x0 >= x1:
                continue
            ch = (dy + radius) * side + (dx + radius)
            out[ch, y0:y1, x0:x1] = (
                np.einsum(
                    "cij,cij->ij",
                    a[:, y0:y1, x0:x1],
                    b[:, y0 + dy : y1 + dy, x0 + dx : x1 + dx],
                )
                / c
            )
    return out
