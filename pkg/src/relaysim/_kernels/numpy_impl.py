"""Pure-numpy implementations of the numeric kernels.

Reference backend. The numba backend mirrors these signatures exactly;
both are exercised against each other by the kernel parity tests.
"""

import numpy as np

TAU = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Wrap angles into [-pi, pi)."""
    return a - TAU * np.floor((a + np.pi) / TAU)


def directional_gain_db(offsets: np.ndarray, gr_db: float) -> np.ndarray:
    """Receive gain gr_db * cos^2(offset), zero beyond +/- 90 deg off boresight.

    cos is taken of |offset| so mirrored offsets yield bitwise-equal gains.
    """
    w = np.abs(wrap_angles(np.asarray(offsets, dtype=np.float64)))
    gain = gr_db * np.cos(w) ** 2
    gain[w > HALF_PI] = 0.0
    return gain


def path_attenuation_db(px: float, py: float, qx: float, qy: float,
                        ax: np.ndarray, ay: np.ndarray,
                        bx: np.ndarray, by: np.ndarray,
                        loss_db: np.ndarray) -> float:
    """Sum of per-segment losses over obstacle segments properly crossed by p-q.

    A crossing counts only when the two segments strictly straddle each
    other; touching an endpoint does not count, so a path grazing a wall
    corner is not attenuated twice.
    """
    if ax.size == 0:
        return 0.0
    dqx = qx - px
    dqy = qy - py
    d1 = dqx * (ay - py) - dqy * (ax - px)
    d2 = dqx * (by - py) - dqy * (bx - px)
    rx = bx - ax
    ry = by - ay
    d3 = rx * (py - ay) - ry * (px - ax)
    d4 = rx * (qy - ay) - ry * (qx - ax)
    crossed = (d1 * d2 < 0.0) & (d3 * d4 < 0.0)
    return float(np.sum(loss_db[crossed]))


def raycast_distances(ox: float, oy: float, angles: np.ndarray,
                      ax: np.ndarray, ay: np.ndarray,
                      bx: np.ndarray, by: np.ndarray,
                      max_range: float) -> np.ndarray:
    """Nearest segment-intersection distance per ray, clipped to max_range."""
    angles = np.asarray(angles, dtype=np.float64)
    out = np.full(angles.shape, max_range, dtype=np.float64)
    if ax.size == 0:
        return out
    cx = np.cos(angles)[:, None]
    cy = np.sin(angles)[:, None]
    rx = (bx - ax)[None, :]
    ry = (by - ay)[None, :]
    wx = (ax - ox)[None, :]
    wy = (ay - oy)[None, :]
    det = rx * cy - ry * cx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rx * wy - ry * wx) / det
        u = (cx * wy - cy * wx) / det
    hit = (np.abs(det) > 1e-12) & (t > 1e-9) & (u >= 0.0) & (u <= 1.0)
    t = np.where(hit, t, np.inf)
    nearest = t.min(axis=1)
    return np.minimum(nearest, max_range)


def wca_reduce(angles: np.ndarray, rssi: np.ndarray, gamma: float) -> float:
    """Weighted-centroid bearing: sum(w*theta)/sum(w) with w = 10^(rssi/gamma).

    Weights are normalized by the strongest sample before exponentiation.
    The ratio w_j/w_k is unchanged, so the centroid is identical, but the
    largest weight is pinned at 1.0 and weak samples cannot underflow.
    """
    shifted = (rssi - np.max(rssi)) / gamma
    w = np.power(10.0, shifted)
    return float(np.sum(w * angles) / np.sum(w))


def sonar_reduce(beam_angles: np.ndarray, distances: np.ndarray,
                 gamma: float) -> float:
    """Weighted-centroid obstacle direction with w = 10^(-distance/gamma)."""
    w = np.power(10.0, -distances / gamma)
    return float(np.sum(w * beam_angles) / np.sum(w))


def error_step_value(e: float, half_count: int, pitch: float,
                     gr_db: float, gamma: float) -> float:
    """One closed-form center-angle correction f(e) for boresight error e.

    Samples sit at offsets e + j*pitch for j = -N..N. The numerator pairs
    +j with -j so that f(0.0) is exactly 0.0 in IEEE arithmetic (the paired
    weights are bitwise equal when e == 0).
    """
    w0 = 10.0 ** (_gain_scalar_np(e, gr_db) / gamma)
    den = w0
    num = 0.0
    for j in range(1, half_count + 1):
        wp = 10.0 ** (_gain_scalar_np(e + j * pitch, gr_db) / gamma)
        wm = 10.0 ** (_gain_scalar_np(e - j * pitch, gr_db) / gamma)
        num += j * (wp - wm)
        den += wp + wm
    return pitch * num / den


def _gain_scalar_np(offset: float, gr_db: float) -> float:
    w = abs(offset - TAU * np.floor((offset + np.pi) / TAU))
    if w > HALF_PI:
        return 0.0
    c = np.cos(w)
    return gr_db * c * c


def error_step_grid(es: np.ndarray, half_count: int, pitch: float,
                    gr_db: float, gamma: float) -> np.ndarray:
    """Vectorized error_step_value over a grid of boresight errors."""
    es = np.asarray(es, dtype=np.float64)
    js = np.arange(1, half_count + 1, dtype=np.float64)
    w0 = np.power(10.0, directional_gain_db(es, gr_db) / gamma)
    wp = np.power(10.0, directional_gain_db(es[:, None] + js * pitch, gr_db) / gamma)
    wm = np.power(10.0, directional_gain_db(es[:, None] - js * pitch, gr_db) / gamma)
    num = np.sum(js * (wp - wm), axis=1)
    den = w0 + np.sum(wp + wm, axis=1)
    return pitch * num / den
