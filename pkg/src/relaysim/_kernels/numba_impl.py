"""Numba-accelerated kernels mirroring numpy_impl signatures.

Compiled lazily on first call; cache=True persists the machine code next
to the package so repeat runs skip compilation.
"""

import numpy as np
from numba import njit

TAU = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


@njit(cache=True)
def _wrap_scalar(a: float) -> float:
    return a - TAU * np.floor((a + np.pi) / TAU)


@njit(cache=True)
def _gain_scalar(offset: float, gr_db: float) -> float:
    w = abs(_wrap_scalar(offset))
    if w > HALF_PI:
        return 0.0
    c = np.cos(w)
    return gr_db * c * c


@njit(cache=True)
def wrap_angles(a):
    out = np.empty(a.shape[0], dtype=np.float64)
    for i in range(a.shape[0]):
        out[i] = _wrap_scalar(a[i])
    return out


@njit(cache=True)
def directional_gain_db(offsets, gr_db):
    out = np.empty(offsets.shape[0], dtype=np.float64)
    for i in range(offsets.shape[0]):
        out[i] = _gain_scalar(offsets[i], gr_db)
    return out


@njit(cache=True)
def path_attenuation_db(px, py, qx, qy, ax, ay, bx, by, loss_db):
    total = 0.0
    dqx = qx - px
    dqy = qy - py
    for i in range(ax.shape[0]):
        d1 = dqx * (ay[i] - py) - dqy * (ax[i] - px)
        d2 = dqx * (by[i] - py) - dqy * (bx[i] - px)
        rx = bx[i] - ax[i]
        ry = by[i] - ay[i]
        d3 = rx * (py - ay[i]) - ry * (px - ax[i])
        d4 = rx * (qy - ay[i]) - ry * (qx - ax[i])
        if d1 * d2 < 0.0 and d3 * d4 < 0.0:
            total += loss_db[i]
    return total


@njit(cache=True)
def raycast_distances(ox, oy, angles, ax, ay, bx, by, max_range):
    out = np.empty(angles.shape[0], dtype=np.float64)
    for i in range(angles.shape[0]):
        cx = np.cos(angles[i])
        cy = np.sin(angles[i])
        best = max_range
        for k in range(ax.shape[0]):
            rx = bx[k] - ax[k]
            ry = by[k] - ay[k]
            det = rx * cy - ry * cx
            if abs(det) <= 1e-12:
                continue
            wx = ax[k] - ox
            wy = ay[k] - oy
            t = (rx * wy - ry * wx) / det
            u = (cx * wy - cy * wx) / det
            if t > 1e-9 and u >= 0.0 and u <= 1.0 and t < best:
                best = t
        out[i] = best
    return out


@njit(cache=True)
def wca_reduce(angles, rssi, gamma):
    m = rssi[0]
    for i in range(1, rssi.shape[0]):
        if rssi[i] > m:
            m = rssi[i]
    num = 0.0
    den = 0.0
    for i in range(rssi.shape[0]):
        w = 10.0 ** ((rssi[i] - m) / gamma)
        num += w * angles[i]
        den += w
    return num / den


@njit(cache=True)
def sonar_reduce(beam_angles, distances, gamma):
    num = 0.0
    den = 0.0
    for i in range(distances.shape[0]):
        w = 10.0 ** (-distances[i] / gamma)
        num += w * beam_angles[i]
        den += w
    return num / den


@njit(cache=True)
def error_step_value(e, half_count, pitch, gr_db, gamma):
    # Paired +j/-j accumulation keeps f(0.0) exactly 0.0: at e == 0 the
    # offsets are exact negations and cos is even, so wp == wm bitwise.
    den = 10.0 ** (_gain_scalar(e, gr_db) / gamma)
    num = 0.0
    for j in range(1, half_count + 1):
        wp = 10.0 ** (_gain_scalar(e + j * pitch, gr_db) / gamma)
        wm = 10.0 ** (_gain_scalar(e - j * pitch, gr_db) / gamma)
        num += j * (wp - wm)
        den += wp + wm
    return pitch * num / den


@njit(cache=True)
def error_step_grid(es, half_count, pitch, gr_db, gamma):
    out = np.empty(es.shape[0], dtype=np.float64)
    for i in range(es.shape[0]):
        out[i] = error_step_value(es[i], half_count, pitch, gr_db, gamma)
    return out
