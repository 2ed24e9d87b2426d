# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cost-volume kernel; drop-in twin of ``_costvol_py.cost_volume``."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def cost_volume(double[:, :, ::1] a, double[:, :, ::1] b, int radius):
    cdef Py_ssize_t c = a.shape[0]
    cdef Py_ssize_t h = a.shape[1]
    cdef Py_ssize_t w = a.shape[2]
    cdef int side = 2 * radius + 1
    out_arr = np.zeros((side * side, h, w))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x, k, sy, sx
    cdef int dy, dx, ch
    cdef double acc
    cdef double inv_c = 1.0 / c
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            ch = (dy + radius) * side + (dx + radius)
            for y in range(h):
                sy = y + dy
                if sy < 0 or sy >= h:
                    continue
                for x in range(w):
                    sx = x + dx
                    if sx < 0 or sx >= w:
                        continue
                    acc = 0.0
                    for k in range(c):
                        acc += a[k, y, x] * b[k, sy, sx]
                    out[ch, y, x] = acc * inv_c
    return out_arr
