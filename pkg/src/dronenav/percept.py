"""Drone camera views: a deterministic flat-shaded renderer plus a ground-truth
semantic channel (visible objects and doors with bearings).

The renderer draws walls, door frames, furniture boxes, and target markers with
one fixed color per semantic class; identical scene and pose always produce
byte-identical PNG output. The semantic channel is what the rule-based pilot
and the consistency tests consume instead of pixels.
"""

from __future__ import annotations

import base64
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image

from .geometry import Rect, bearing_deg, heading_vec, segment_intersects_rect, segments_intersect
from .sim import DronePose
from .world import FloorPlan, room_of


@dataclass(frozen=True)
class CameraModel:
    horizontal_fov: float = 80.0  # degrees
    width: int = 640
    height: int = 480
    forward_offset: float = 0.0  # meters ahead of the drone center

    def __post_init__(self) -> None:
        if not (0.0 < self.horizontal_fov < 180.0):
            raise ValueError("horizontal_fov must be in (0, 180)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def tan_half_fov(self) -> float:
        return math.tan(math.radians(self.horizontal_fov) / 2.0)

    @property
    def tan_half_vfov(self) -> float:
        # Square pixels: vertical half-extent scales with the aspect ratio.
        return self.tan_half_fov * self.height / self.width


@dataclass(frozen=True)
class RenderedImage:
    width: int
    height: int
    pixels: np.ndarray  # (H, W, 3) uint8
    png_bytes: bytes
    base64_text: str

    @classmethod
    def from_pixels(cls, pixels: np.ndarray) -> "RenderedImage":
        buf = io.BytesIO()
        Image.fromarray(pixels, "RGB").save(buf, format="PNG")
        png = buf.getvalue()
        return cls(
            width=pixels.shape[1],
            height=pixels.shape[0],
            pixels=pixels,
            png_bytes=png,
            base64_text=base64.b64encode(png).decode("ascii"),
        )


@dataclass(frozen=True)
class VisibleObject:
    object_id: str
    bearing: float  # degrees, negative = left
    distance: float  # meters, horizontal
    angular_width: float  # degrees
    occluded_fraction: float  # in [0, 1]


@dataclass(frozen=True)
class VisibleDoor:
    door_id: str
    bearing: float
    distance: float
    position: str  # left | center | right


@dataclass(frozen=True)
class SemanticObservation:
    visible_objects: tuple[VisibleObject, ...]
    visible_doors: tuple[VisibleDoor, ...]
    current_room: str

    def to_dict(self) -> dict:
        return {
            "current_room": self.current_room,
            "visible_objects": [
                [o.object_id, o.bearing, o.distance, o.angular_width, o.occluded_fraction]
                for o in self.visible_objects
            ],
            "visible_doors": [
                [d.door_id, d.bearing, d.distance, d.position] for d in self.visible_doors
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SemanticObservation":
        return cls(
            visible_objects=tuple(VisibleObject(*row) for row in data["visible_objects"]),
            visible_doors=tuple(VisibleDoor(*row) for row in data["visible_doors"]),
            current_room=data["current_room"],
        )


# ---------------------------------------------------------------------------
# Colors

CLASS_COLORS = {
    "wall": (201, 198, 190),
    "floor": (104, 100, 94),
    "door": (224, 162, 70),
    "background": (236, 238, 242),
}

NAMED_COLORS = {
    "red": (219, 58, 52),
    "green": (60, 174, 92),
    "blue": (62, 100, 216),
    "yellow": (233, 213, 70),
    "cyan": (64, 199, 208),
    "magenta": (197, 66, 197),
    "orange": (239, 146, 52),
    "brown": (128, 91, 57),
    "teal": (38, 131, 128),
    "purple": (132, 74, 180),
    "pink": (233, 150, 178),
    "olive": (128, 128, 52),
    "navy": (44, 54, 118),
    "white": (242, 242, 238),
    "black": (28, 28, 30),
    "gray": (148, 148, 148),
}


def resolve_color(tag: str) -> tuple[int, int, int]:
    if tag.startswith("#") and len(tag) == 7:
        return tuple(int(tag[i : i + 2], 16) for i in (1, 3, 5))  # type: ignore[return-value]
    try:
        return NAMED_COLORS[tag]
    except KeyError:
        raise ValueError(f"unknown color tag {tag!r}") from None


# ---------------------------------------------------------------------------
# Door position classification


def classify_door_position(bearing: float, camera: CameraModel = CameraModel()) -> str:
    """Map a bearing to the response contract's left/center/right/not_visible.

    "center" is the band where the normalized image abscissa
    u = tan(bearing) / tan(fov/2) stays within 10% of the image center.
    """
    half = camera.horizontal_fov / 2.0
    if abs(bearing) > half:
        return "not_visible"
    u = math.tan(math.radians(bearing)) / camera.tan_half_fov
    if abs(u) <= 0.10:
        return "center"
    return "left" if bearing < 0 else "right"


# ---------------------------------------------------------------------------
# Semantic observation

_RAY_SHORTEN = 0.015  # stop occlusion rays just short of the entity surface


def _ray_blocked(plan: FloorPlan, origin: tuple[float, float], target: tuple[float, float]) -> bool:
    dx, dz = target[0] - origin[0], target[1] - origin[1]
    length = math.hypot(dx, dz)
    if length <= _RAY_SHORTEN:
        return False
    scale = (length - _RAY_SHORTEN) / length
    end = (origin[0] + dx * scale, origin[1] + dz * scale)
    for wall in plan.walls:
        if segments_intersect(origin, end, wall.a, wall.b) is not None:
            return True
    for item in plan.furniture:
        if segment_intersects_rect(origin, end, item.footprint):
            return True
    return False


def _camera_position(pose: DronePose, camera: CameraModel) -> tuple[float, float]:
    hx, hz = heading_vec(pose.yaw)
    return (pose.x + camera.forward_offset * hx, pose.z + camera.forward_offset * hz)


def _occluded_fraction(
    plan: FloorPlan, origin: tuple[float, float], points: list[tuple[float, float]]
) -> float:
    blocked = sum(1 for p in points if _ray_blocked(plan, origin, p))
    return blocked / len(points)


def semantic_observe(
    plan: FloorPlan, pose: DronePose, camera: CameraModel = CameraModel()
) -> SemanticObservation:
    """Ground-truth visibility: entities in the frustum whose center ray is clear."""
    origin = _camera_position(pose, camera)
    half_fov = camera.horizontal_fov / 2.0

    objects = []
    for obj in plan.objects:
        b = bearing_deg(origin[0], origin[1], pose.yaw, obj.position[0], obj.position[1])
        if abs(b) > half_fov:
            continue
        if _ray_blocked(plan, origin, obj.position):
            continue
        corner_bearings = [
            bearing_deg(origin[0], origin[1], pose.yaw, cx, cz)
            for cx, cz in obj.footprint.corners()
        ]
        width = max(corner_bearings) - min(corner_bearings)
        occluded = _occluded_fraction(plan, origin, [obj.position] + obj.footprint.corners())
        dist = math.hypot(obj.position[0] - origin[0], obj.position[1] - origin[1])
        objects.append(
            VisibleObject(
                object_id=obj.id,
                bearing=b,
                distance=dist,
                angular_width=width,
                occluded_fraction=occluded,
            )
        )

    doors = []
    for door in plan.doors:
        mx, mz = door.midpoint
        b = bearing_deg(origin[0], origin[1], pose.yaw, mx, mz)
        if abs(b) > half_fov:
            continue
        if _ray_blocked(plan, origin, (mx, mz)):
            continue
        dist = math.hypot(mx - origin[0], mz - origin[1])
        doors.append(
            VisibleDoor(
                door_id=door.id,
                bearing=b,
                distance=dist,
                position=classify_door_position(b, camera),
            )
        )

    return SemanticObservation(
        visible_objects=tuple(sorted(objects, key=lambda o: o.object_id)),
        visible_doors=tuple(sorted(doors, key=lambda d: d.door_id)),
        current_room=room_of(plan, pose.x, pose.z),
    )


# ---------------------------------------------------------------------------
# Rendering

_NEAR = 0.05
_JAMB_WIDTH = 0.08
_JAMB_OFFSET = 0.012
_LINTEL_BOTTOM = 2.0


def _quad(p0, p1, p2, p3) -> list[tuple]:
    return [(p0, p1, p2), (p0, p2, p3)]


class Renderer:
    """Flat-shaded software renderer bound to one plan and camera.

    Pure and reentrant: rendering only reads precomputed scene geometry, so one
    renderer may serve concurrent callers.
    """

    def __init__(self, plan: FloorPlan, camera: CameraModel = CameraModel()) -> None:
        self.plan = plan
        self.camera = camera
        tris: list[tuple] = []
        colors: list[tuple[int, int, int]] = []

        def add(triangles: list[tuple], color: tuple[int, int, int]) -> None:
            tris.extend(triangles)
            colors.extend([color] * len(triangles))

        h = plan.ceiling_height

        # Door frames first so that later geometry cannot win depth ties on them.
        for door in plan.doors:
            (ax, az), (bx, bz) = door.opening
            length = math.hypot(bx - ax, bz - az)
            ux, uz = (bx - ax) / length, (bz - az) / length
            nx, nz = -uz, ux
            for sx, sz, ex, ez in (
                (ax - _JAMB_WIDTH * ux, az - _JAMB_WIDTH * uz, ax, az),
                (bx, bz, bx + _JAMB_WIDTH * ux, bz + _JAMB_WIDTH * uz),
            ):
                for side in (1.0, -1.0):
                    ox, oz = side * _JAMB_OFFSET * nx, side * _JAMB_OFFSET * nz
                    add(
                        _quad(
                            (sx + ox, 0.0, sz + oz),
                            (ex + ox, 0.0, ez + oz),
                            (ex + ox, h, ez + oz),
                            (sx + ox, h, sz + oz),
                        ),
                        CLASS_COLORS["door"],
                    )
            add(
                _quad(
                    (ax, _LINTEL_BOTTOM, az),
                    (bx, _LINTEL_BOTTOM, bz),
                    (bx, h, bz),
                    (ax, h, az),
                ),
                CLASS_COLORS["door"],
            )

        for wall in plan.walls:
            (ax, az), (bx, bz) = wall.a, wall.b
            add(
                _quad((ax, 0.0, az), (bx, 0.0, bz), (bx, h, bz), (ax, h, az)),
                CLASS_COLORS["wall"],
            )

        for room in plan.rooms:
            r = room.footprint
            add(
                _quad((r.x0, 0.0, r.z0), (r.x1, 0.0, r.z0), (r.x1, 0.0, r.z1), (r.x0, 0.0, r.z1)),
                CLASS_COLORS["floor"],
            )

        for item in plan.furniture:
            r = item.footprint
            c = resolve_color(item.color)
            top = item.height
            add(_quad((r.x0, 0, r.z0), (r.x1, 0, r.z0), (r.x1, top, r.z0), (r.x0, top, r.z0)), c)
            add(_quad((r.x1, 0, r.z0), (r.x1, 0, r.z1), (r.x1, top, r.z1), (r.x1, top, r.z0)), c)
            add(_quad((r.x1, 0, r.z1), (r.x0, 0, r.z1), (r.x0, top, r.z1), (r.x1, top, r.z1)), c)
            add(_quad((r.x0, 0, r.z1), (r.x0, 0, r.z0), (r.x0, top, r.z0), (r.x0, top, r.z1)), c)
            add(_quad((r.x0, top, r.z0), (r.x1, top, r.z0), (r.x1, top, r.z1), (r.x0, top, r.z1)), c)

        self._static_verts = np.array(tris, dtype=np.float64)  # (N, 3, 3)
        self._static_colors = np.array(colors, dtype=np.uint8)  # (N, 3)

    # -- public API ---------------------------------------------------------

    def frontal(self, pose: DronePose) -> RenderedImage:
        return RenderedImage.from_pixels(self._render(pose))

    def rear(self, pose: DronePose) -> RenderedImage:
        flipped = DronePose(pose.x, pose.y, pose.z, pose.yaw + 180.0)
        return RenderedImage.from_pixels(self._render(flipped))

    # -- internals ----------------------------------------------------------

    def _render(self, pose: DronePose) -> np.ndarray:
        cam = self.camera
        cx, cz = _camera_position(pose, cam)
        cy = pose.y
        hx, hz = heading_vec(pose.yaw)
        rx, rz = hz, -hx  # camera right = heading rotated -90 degrees

        verts = self._static_verts
        dx = verts[..., 0] - cx
        dy = verts[..., 1] - cy
        dz = verts[..., 2] - cz
        lat = dx * rx + dz * rz
        fwd = dx * hx + dz * hz
        cam_tris = np.stack([lat, dy, fwd], axis=-1)  # (N, 3, 3) in (l, v, f)
        tri_list = [cam_tris[i] for i in range(cam_tris.shape[0])]
        color_list = [tuple(c) for c in self._static_colors]

        # Targets are camera-facing markers, so their projection stays centered
        # on the object position at any distance.
        for obj in self.plan.objects:
            ox, oz = obj.position
            f = (ox - cx) * hx + (oz - cz) * hz
            l = (ox - cx) * rx + (oz - cz) * rz
            half_w = max(obj.footprint.width, obj.footprint.depth) / 2.0
            v0, v1 = -cy, obj.height - cy
            quad = np.array(
                [
                    [l - half_w, v0, f],
                    [l + half_w, v0, f],
                    [l + half_w, v1, f],
                    [l - half_w, v1, f],
                ]
            )
            color = resolve_color(obj.color)
            tri_list.append(quad[[0, 1, 2]])
            color_list.append(color)
            tri_list.append(quad[[0, 2, 3]])
            color_list.append(color)

        img = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
        img[:] = CLASS_COLORS["background"]
        zbuf = np.zeros((cam.height, cam.width), dtype=np.float64)

        for tri, color in zip(tri_list, color_list):
            for clipped in _clip_near_triangle(tri):
                self._raster(img, zbuf, clipped, color)
        return img

    def _raster(self, img: np.ndarray, zbuf: np.ndarray, tri: np.ndarray, color) -> None:
        cam = self.camera
        f = tri[:, 2]
        inv_f = 1.0 / f
        u = tri[:, 0] * inv_f / cam.tan_half_fov
        v = tri[:, 1] * inv_f / cam.tan_half_vfov
        px = (u + 1.0) * 0.5 * cam.width - 0.5
        py = (1.0 - v) * 0.5 * cam.height - 0.5

        min_x = max(int(math.ceil(px.min())), 0)
        max_x = min(int(math.floor(px.max())), cam.width - 1)
        min_y = max(int(math.ceil(py.min())), 0)
        max_y = min(int(math.floor(py.max())), cam.height - 1)
        if min_x > max_x or min_y > max_y:
            return

        area = (px[1] - px[0]) * (py[2] - py[0]) - (py[1] - py[0]) * (px[2] - px[0])
        if abs(area) < 1e-12:
            return
        ii = np.arange(min_x, max_x + 1, dtype=np.float64)[None, :]
        jj = np.arange(min_y, max_y + 1, dtype=np.float64)[:, None]
        w0 = (px[2] - px[1]) * (jj - py[1]) - (py[2] - py[1]) * (ii - px[1])
        w1 = (px[0] - px[2]) * (jj - py[2]) - (py[0] - py[2]) * (ii - px[2])
        w2 = (px[1] - px[0]) * (jj - py[0]) - (py[1] - py[0]) * (ii - px[0])
        if area < 0:
            w0, w1, w2, total = -w0, -w1, -w2, -area
        else:
            total = area
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            return
        depth = (w0 * inv_f[0] + w1 * inv_f[1] + w2 * inv_f[2]) / total
        region = zbuf[min_y : max_y + 1, min_x : max_x + 1]
        update = inside & (depth > region)
        region[update] = depth[update]
        img_region = img[min_y : max_y + 1, min_x : max_x + 1]
        img_region[update] = np.array(color, dtype=np.uint8)


def _clip_near_triangle(tri: np.ndarray, near: float = _NEAR) -> list[np.ndarray]:
    """Clip a camera-space triangle against the near plane; fan-triangulate."""
    inside = tri[:, 2] >= near
    if inside.all():
        return [tri]
    if not inside.any():
        return []
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        if inside[i]:
            poly.append(a)
        if inside[i] != inside[(i + 1) % 3]:
            t = (near - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    return [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def render_frontal(
    plan: FloorPlan, pose: DronePose, camera: CameraModel = CameraModel()
) -> RenderedImage:
    """One-shot frontal view (builds a Renderer; reuse Renderer for loops)."""
    return Renderer(plan, camera).frontal(pose)


def render_rear(
    plan: FloorPlan, pose: DronePose, camera: CameraModel = CameraModel()
) -> RenderedImage:
    return Renderer(plan, camera).rear(pose)
