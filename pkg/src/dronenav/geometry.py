"""2D geometry primitives shared by the world model, simulator, and perception.

All coordinates live in the X-Z ground plane (meters). Angles are degrees.
"""

from __future__ import annotations

import math
from typing import NamedTuple

EPS = 1e-9


class Rect(NamedTuple):
    """Axis-aligned rectangle (x0, z0, x1, z1) with x0 <= x1, z0 <= z1."""

    x0: float
    z0: float
    x1: float
    z1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def depth(self) -> float:
        return self.z1 - self.z0

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.z0 + self.z1))

    def corners(self) -> list[tuple[float, float]]:
        return [(self.x0, self.z0), (self.x1, self.z0), (self.x1, self.z1), (self.x0, self.z1)]

    def contains(self, x: float, z: float) -> bool:
        # Half-open on the far edges so adjacent rectangles never both claim a point.
        return self.x0 <= x < self.x1 and self.z0 <= z < self.z1

    def overlap_area(self, other: "Rect") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        d = min(self.z1, other.z1) - max(self.z0, other.z0)
        return w * d if (w > 0 and d > 0) else 0.0


def normalize_deg(angle: float) -> float:
    """Normalize an angle to [0, 360)."""
    a = math.fmod(angle, 360.0)
    return a + 360.0 if a < 0 else a


def signed_delta_deg(angle: float) -> float:
    """Map an angle difference to (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def heading_vec(yaw_deg: float) -> tuple[float, float]:
    """Unit heading in the X-Z plane; yaw counterclockwise from +X."""
    r = math.radians(yaw_deg)
    return (math.cos(r), math.sin(r))


def bearing_deg(x: float, z: float, yaw_deg: float, tx: float, tz: float) -> float:
    """Signed horizontal angle from the heading at (x, z, yaw) to target (tx, tz).

    Positive means the target is to the right of the optical axis, negative left.
    """
    hx, hz = heading_vec(yaw_deg)
    dx, dz = tx - x, tz - z
    forward = dx * hx + dz * hz
    # Right vector = heading rotated -90 degrees.
    lateral = dx * hz - dz * hx
    return math.degrees(math.atan2(lateral, forward))


def dist_point_segment(px: float, pz: float, ax: float, az: float, bx: float, bz: float) -> float:
    """Distance from point p to segment ab."""
    abx, abz = bx - ax, bz - az
    apx, apz = px - ax, pz - az
    denom = abx * abx + abz * abz
    if denom < EPS:
        return math.hypot(apx, apz)
    t = (apx * abx + apz * abz) / denom
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(px - (ax + t * abx), pz - (az + t * abz))


def closest_point_on_segment(
    px: float, pz: float, ax: float, az: float, bx: float, bz: float
) -> tuple[float, float]:
    abx, abz = bx - ax, bz - az
    denom = abx * abx + abz * abz
    if denom < EPS:
        return (ax, az)
    t = ((px - ax) * abx + (pz - az) * abz) / denom
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return (ax + t * abx, az + t * abz)


def dist_point_rect(px: float, pz: float, rect: Rect) -> float:
    """Distance from a point to an axis-aligned rectangle (0 if inside)."""
    dx = max(rect.x0 - px, 0.0, px - rect.x1)
    dz = max(rect.z0 - pz, 0.0, pz - rect.z1)
    return math.hypot(dx, dz)


def closest_point_on_rect(px: float, pz: float, rect: Rect) -> tuple[float, float]:
    cx = min(max(px, rect.x0), rect.x1)
    cz = min(max(pz, rect.z0), rect.z1)
    return (cx, cz)


def segments_intersect(
    p1: tuple[float, float],
    p2: tuple[float, float],
    q1: tuple[float, float],
    q2: tuple[float, float],
) -> tuple[float, float] | None:
    """Intersection point of proper (non-parallel) segment crossings, else None.

    Parallel and collinear pairs report None; overlap of collinear segments is
    handled separately where it matters (see segments_overlap_collinear).
    """
    rx, rz = p2[0] - p1[0], p2[1] - p1[1]
    sx, sz = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sz - rz * sx
    if abs(denom) < EPS:
        return None
    qpx, qpz = q1[0] - p1[0], q1[1] - p1[1]
    t = (qpx * sz - qpz * sx) / denom
    u = (qpx * rz - qpz * rx) / denom
    if -EPS <= t <= 1 + EPS and -EPS <= u <= 1 + EPS:
        return (p1[0] + t * rx, p1[1] + t * rz)
    return None


def segments_overlap_collinear(
    p1: tuple[float, float],
    p2: tuple[float, float],
    q1: tuple[float, float],
    q2: tuple[float, float],
    tol: float = 1e-6,
) -> float:
    """Length of the overlap between two collinear segments (0 if not collinear)."""
    rx, rz = p2[0] - p1[0], p2[1] - p1[1]
    length = math.hypot(rx, rz)
    if length < EPS:
        return 0.0
    ux, uz = rx / length, rz / length
    # Both q endpoints must sit on the p-line.
    for q in (q1, q2):
        off = abs((q[0] - p1[0]) * uz - (q[1] - p1[1]) * ux)
        if off > tol:
            return 0.0
    t1 = (q1[0] - p1[0]) * ux + (q1[1] - p1[1]) * uz
    t2 = (q2[0] - p1[0]) * ux + (q2[1] - p1[1]) * uz
    lo, hi = min(t1, t2), max(t1, t2)
    return max(0.0, min(hi, length) - max(lo, 0.0))


def segment_intersects_rect(
    p1: tuple[float, float], p2: tuple[float, float], rect: Rect
) -> bool:
    """True if segment p1-p2 touches an axis-aligned rectangle (Liang-Barsky)."""
    if rect.contains(p1[0], p1[1]) or rect.contains(p2[0], p2[1]):
        return True
    dx, dz = p2[0] - p1[0], p2[1] - p1[1]
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, p1[0] - rect.x0),
        (dx, rect.x1 - p1[0]),
        (-dz, p1[1] - rect.z0),
        (dz, rect.z1 - p1[1]),
    ):
        if abs(p) < EPS:
            if q < 0:
                return False
        else:
            r = q / p
            if p < 0:
                if r > t1:
                    return False
                t0 = max(t0, r)
            else:
                if r < t0:
                    return False
                t1 = min(t1, r)
    return t0 <= t1
