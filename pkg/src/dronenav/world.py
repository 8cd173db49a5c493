"""Floor plans, room membership, and the room-connectivity (topological) map.

A floor plan is loaded from a YAML/JSON document and is immutable afterwards;
all geometry lives in the X-Z ground plane with +Y up, lengths in meters.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .geometry import Rect, segments_intersect, segments_overlap_collinear


class PlanError(ValueError):
    """Raised when a floor-plan document fails to parse or violates an invariant."""


class NoPathError(ValueError):
    """Raised when two rooms are not connected in the topological map."""


@dataclass(frozen=True)
class Room:
    id: str
    label: str
    footprint: Rect

    def __post_init__(self) -> None:
        if self.footprint.width <= 0 or self.footprint.depth <= 0:
            raise PlanError(f"room {self.id!r}: footprint must have positive width and depth")


@dataclass(frozen=True)
class WallSegment:
    id: str
    a: tuple[float, float]
    b: tuple[float, float]


@dataclass(frozen=True)
class Door:
    id: str
    rooms: tuple[str, str]
    opening: tuple[tuple[float, float], tuple[float, float]]
    width: float

    @property
    def midpoint(self) -> tuple[float, float]:
        (ax, az), (bx, bz) = self.opening
        return (0.5 * (ax + bx), 0.5 * (az + bz))


@dataclass(frozen=True)
class Obstacle:
    """A furniture item: an axis-aligned box sitting on the floor."""

    id: str
    footprint: Rect
    height: float
    color: str = "gray"


@dataclass(frozen=True)
class TargetObject:
    id: str
    label: str
    position: tuple[float, float]
    footprint: Rect
    room: str
    color: str
    height: float = 1.0


@dataclass(frozen=True)
class FloorPlan:
    name: str
    rooms: list[Room]
    walls: list[WallSegment]
    doors: list[Door]
    furniture: list[Obstacle]
    objects: list[TargetObject]
    ceiling_height: float

    def room_by_id(self, room_id: str) -> Room:
        for room in self.rooms:
            if room.id == room_id:
                return room
        raise KeyError(room_id)

    def object_by_id(self, object_id: str) -> TargetObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def door_by_id(self, door_id: str) -> Door:
        for door in self.doors:
            if door.id == door_id:
                return door
        raise KeyError(door_id)

    def doors_between(self, room_a: str, room_b: str) -> list[Door]:
        pair = {room_a, room_b}
        return sorted((d for d in self.doors if set(d.rooms) == pair), key=lambda d: d.id)


@dataclass(frozen=True)
class TopologicalMap:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def neighbors(self, room_id: str) -> list[str]:
        out = set()
        for a, b in self.edges:
            if a == room_id:
                out.add(b)
            elif b == room_id:
                out.add(a)
        return sorted(out)


# ---------------------------------------------------------------------------
# Loading and validation


def _require(data: dict, key: str, context: str):
    if key not in data:
        raise PlanError(f"{context}: missing field {key!r}")
    return data[key]


def _rect(values, context: str) -> Rect:
    try:
        x0, z0, x1, z1 = (float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise PlanError(f"{context}: footprint must be [x0, z0, x1, z1]") from exc
    if x1 < x0 or z1 < z0:
        raise PlanError(f"{context}: footprint corners out of order")
    return Rect(x0, z0, x1, z1)


def _point(values, context: str) -> tuple[float, float]:
    try:
        x, z = (float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise PlanError(f"{context}: expected [x, z]") from exc
    return (x, z)


def plan_from_dict(data: dict, source: str = "<memory>") -> FloorPlan:
    """Build and validate a FloorPlan from a parsed document."""
    if not isinstance(data, dict):
        raise PlanError(f"{source}: top level must be a mapping")
    name = str(_require(data, "name", source))
    ceiling = float(_require(data, "ceiling_height", source))
    if ceiling <= 0:
        raise PlanError(f"{source}: ceiling_height must be positive")

    rooms = []
    for i, raw in enumerate(data.get("rooms", []) or []):
        ctx = f"{source}: rooms[{i}]"
        rooms.append(
            Room(
                id=str(_require(raw, "id", ctx)),
                label=str(raw.get("label", raw["id"])),
                footprint=_rect(_require(raw, "footprint", ctx), ctx),
            )
        )
    if not rooms:
        raise PlanError(f"{source}: plan needs at least one room")

    walls = []
    for i, raw in enumerate(data.get("walls", []) or []):
        ctx = f"{source}: walls[{i}]"
        walls.append(
            WallSegment(
                id=str(raw.get("id", f"wall_{i:03d}")),
                a=_point(_require(raw, "a", ctx), ctx),
                b=_point(_require(raw, "b", ctx), ctx),
            )
        )

    doors = []
    for i, raw in enumerate(data.get("doors", []) or []):
        ctx = f"{source}: doors[{i}]"
        room_pair = _require(raw, "rooms", ctx)
        if not isinstance(room_pair, (list, tuple)) or len(room_pair) != 2:
            raise PlanError(f"{ctx}: rooms must be a pair of room ids")
        opening = _require(raw, "opening", ctx)
        a = _point(opening[0], ctx)
        b = _point(opening[1], ctx)
        width = float(raw.get("width", ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) ** 0.5))
        doors.append(
            Door(
                id=str(raw.get("id", f"door_{i:03d}")),
                rooms=(str(room_pair[0]), str(room_pair[1])),
                opening=(a, b),
                width=width,
            )
        )

    furniture = []
    for i, raw in enumerate(data.get("furniture", []) or []):
        ctx = f"{source}: furniture[{i}]"
        furniture.append(
            Obstacle(
                id=str(raw.get("id", f"furniture_{i:03d}")),
                footprint=_rect(_require(raw, "footprint", ctx), ctx),
                height=float(raw.get("height", 1.0)),
                color=str(raw.get("color", "gray")),
            )
        )

    objects = []
    for i, raw in enumerate(data.get("objects", []) or []):
        ctx = f"{source}: objects[{i}]"
        objects.append(
            TargetObject(
                id=str(_require(raw, "id", ctx)),
                label=str(raw.get("label", raw["id"])),
                position=_point(_require(raw, "position", ctx), ctx),
                footprint=_rect(_require(raw, "footprint", ctx), ctx),
                room=str(_require(raw, "room", ctx)),
                color=str(raw.get("color", "red")),
                height=float(raw.get("height", 1.0)),
            )
        )

    plan = FloorPlan(
        name=name,
        rooms=rooms,
        walls=walls,
        doors=doors,
        furniture=furniture,
        objects=objects,
        ceiling_height=ceiling,
    )
    _validate_plan(plan, source)
    return plan


def _validate_plan(plan: FloorPlan, source: str) -> None:
    room_ids = [r.id for r in plan.rooms]
    if len(set(room_ids)) != len(room_ids):
        raise PlanError(f"{source}: duplicate room ids")

    for i, a in enumerate(plan.rooms):
        for b in plan.rooms[i + 1 :]:
            if a.footprint.overlap_area(b.footprint) > 1e-9:
                raise PlanError(
                    f"{source}: room footprints overlap ({a.id!r} and {b.id!r})"
                )

    for door in plan.doors:
        ra, rb = door.rooms
        if ra == rb:
            raise PlanError(f"{source}: door {door.id!r} must join two distinct rooms")
        for rid in (ra, rb):
            if rid not in room_ids:
                raise PlanError(f"{source}: door {door.id!r} references unknown room {rid!r}")
        (ax, az), (bx, bz) = door.opening
        length = ((ax - bx) ** 2 + (az - bz) ** 2) ** 0.5
        if door.width <= 0 or abs(door.width - length) > 1e-6:
            raise PlanError(
                f"{source}: door {door.id!r} width {door.width} does not match its opening length {length:.6f}"
            )

    # Door openings must be true gaps: no wall may cross or overlap the open span.
    for door in plan.doors:
        a, b = door.opening
        for wall in plan.walls:
            if segments_overlap_collinear(a, b, wall.a, wall.b) > 1e-6:
                raise PlanError(
                    f"{source}: wall {wall.id!r} overlaps opening of door {door.id!r}"
                )
            hit = segments_intersect(a, b, wall.a, wall.b)
            if hit is not None:
                # Touching the opening's endpoints is how jamb walls terminate.
                if min(
                    ((hit[0] - p[0]) ** 2 + (hit[1] - p[1]) ** 2) for p in (a, b)
                ) > 1e-9:
                    raise PlanError(
                        f"{source}: wall {wall.id!r} crosses opening of door {door.id!r}"
                    )

    for obj in plan.objects:
        if obj.room not in room_ids:
            raise PlanError(f"{source}: object {obj.id!r} references unknown room {obj.room!r}")
        containing = [r.id for r in plan.rooms if r.footprint.contains(*obj.position)]
        if containing != [obj.room]:
            raise PlanError(
                f"{source}: object {obj.id!r} position {obj.position} is not inside room "
                f"{obj.room!r} (found {containing or 'no room'})"
            )


def load_floor_plan(path: str | Path) -> FloorPlan:
    """Load a floor plan document (YAML or JSON) and validate its invariants."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise PlanError(f"{p}: cannot read plan file: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise PlanError(f"{p}: parse error: {exc}") from exc
    return plan_from_dict(data, source=str(p))


def default_plan_path() -> Path:
    return Path(str(resources.files("dronenav").joinpath("data/default_plan.yaml")))


def load_default_plan() -> FloorPlan:
    return load_floor_plan(default_plan_path())


# ---------------------------------------------------------------------------
# Queries


def room_of(plan: FloorPlan, x: float, z: float) -> str:
    """Room id whose footprint contains (x, z), or "unknown"."""
    for room in plan.rooms:
        if room.footprint.contains(x, z):
            return room.id
    return "unknown"


def topological_map_of(plan: FloorPlan) -> TopologicalMap:
    """Room-connectivity graph: one node per room, one edge per door."""
    nodes = tuple(sorted(r.id for r in plan.rooms))
    edges = sorted({tuple(sorted(d.rooms)) for d in plan.doors})
    return TopologicalMap(nodes=nodes, edges=tuple(edges))


def serialize_topological_map(topo: TopologicalMap) -> str:
    """Stable JSON form used inside prompts."""
    return json.dumps(
        {"nodes": list(topo.nodes), "edges": [list(e) for e in topo.edges]},
        sort_keys=True,
        separators=(", ", ": "),
    )


def room_path(topo: TopologicalMap, start: str, goal: str) -> list[str]:
    """Shortest path by edge count, endpoints inclusive, lexicographic tie-break."""
    for rid in (start, goal):
        if rid not in topo.nodes:
            raise KeyError(rid)
    if start == goal:
        return [start]

    # BFS distances from the goal, then walk greedily from the start picking the
    # smallest neighbor id that still makes progress.
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        node = queue.popleft()
        for nb in topo.neighbors(node):
            if nb not in dist:
                dist[nb] = dist[node] + 1
                queue.append(nb)
    if start not in dist:
        raise NoPathError(f"no path between {start!r} and {goal!r}")

    path = [start]
    current = start
    while current != goal:
        current = min(nb for nb in topo.neighbors(current) if dist.get(nb, -1) == dist[current] - 1)
        path.append(current)
    return path
