"""Small planar-geometry helpers shared across modules."""

import math

TAU = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = math.remainder(a, TAU)
    if w <= -math.pi:
        return math.pi
    return w


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation from b to a, in (-pi, pi]."""
    return wrap_angle(a - b)


def distance(ax: float, ay: float, bx: float, by: float) -> float:
    return math.hypot(bx - ax, by - ay)


def bearing_to(from_x: float, from_y: float, to_x: float, to_y: float) -> float:
    """World-frame direction of the vector from -> to."""
    return math.atan2(to_y - from_y, to_x - from_x)
