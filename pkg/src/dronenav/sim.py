"""Kinematic drone simulator: motion commands, swept-disc collision, observations.

Motion is deterministic and purely kinematic. The drone body is a horizontal
disc; translations are sub-stepped and stop at the last collision-free
position, rotations happen in place and never collide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional

from .geometry import (
    closest_point_on_rect,
    closest_point_on_segment,
    dist_point_rect,
    dist_point_segment,
    heading_vec,
    normalize_deg,
)
from .world import FloorPlan

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .percept import Renderer, RenderedImage, SemanticObservation


class MotionError(ValueError):
    """Bad command usage (unknown code, rotation helper fed a translation, ...)."""


class StartInCollisionError(ValueError):
    """The starting pose already intersects geometry; motion is undefined there."""


@dataclass(frozen=True)
class DronePose:
    x: float
    y: float
    z: float
    yaw: float  # degrees in [0, 360)

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", normalize_deg(self.yaw))


@dataclass(frozen=True)
class DroneBody:
    bounding_radius: float = 0.12  # horizontal disc covering the propeller tips
    height: float = 0.05

    def __post_init__(self) -> None:
        if self.bounding_radius <= 0:
            raise ValueError("bounding_radius must be positive")


@dataclass(frozen=True)
class MotionCommand:
    code: str
    kind: str  # forward | rotate_right | rotate_left | lateral_left | lateral_right | none
    magnitude: float  # meters for translations, degrees for rotations, 0 for E


COMMANDS: dict[str, MotionCommand] = {
    "A1": MotionCommand("A1", "forward", 0.10),
    "A2": MotionCommand("A2", "forward", 0.25),
    "A3": MotionCommand("A3", "forward", 0.50),
    "B1": MotionCommand("B1", "rotate_right", 15.0),
    "B2": MotionCommand("B2", "rotate_right", 45.0),
    "B3": MotionCommand("B3", "rotate_right", 90.0),
    "C1": MotionCommand("C1", "rotate_left", 15.0),
    "C2": MotionCommand("C2", "rotate_left", 45.0),
    "C3": MotionCommand("C3", "rotate_left", 90.0),
    "D1": MotionCommand("D1", "lateral_left", 0.10),
    "D2": MotionCommand("D2", "lateral_right", 0.10),
    "E": MotionCommand("E", "none", 0.0),
}

ROTATION_CODES = frozenset({"B1", "B2", "B3", "C1", "C2", "C3"})
TRANSLATION_CODES = frozenset({"A1", "A2", "A3", "D1", "D2"})


def command(code: str) -> MotionCommand:
    try:
        return COMMANDS[code]
    except KeyError:
        raise MotionError(f"unknown motion command {code!r}") from None


def command_description(code: str, rotation_convention: str = "b-right") -> str:
    """Human-readable one-liner for prompt templates."""
    cmd = command(code)
    if cmd.kind == "forward":
        return f"move forward {cmd.magnitude * 100:.0f} cm"
    if cmd.kind in ("rotate_right", "rotate_left"):
        right = (cmd.kind == "rotate_right") == (rotation_convention == "b-right")
        return f"rotate {'right' if right else 'left'} {cmd.magnitude:.0f} degrees"
    if cmd.kind == "lateral_left":
        return "move left 10 cm"
    if cmd.kind == "lateral_right":
        return "move right 10 cm"
    return "no movement"


@dataclass(frozen=True)
class SimConfig:
    sub_step: float = 0.02  # meters; collision sampling resolution
    rotation_convention: str = "b-right"  # "b-right" (default) or "b-left" to swap B/C

    def __post_init__(self) -> None:
        if self.sub_step <= 0:
            raise ValueError("sub_step must be positive")
        if self.rotation_convention not in ("b-right", "b-left"):
            raise ValueError("rotation_convention must be 'b-right' or 'b-left'")


@dataclass(frozen=True)
class Contact:
    obstacle_id: str
    point: tuple[float, float]


@dataclass(frozen=True)
class StepResult:
    pose: DronePose
    collided: bool
    contact: Optional[Contact]
    traveled: float  # meters for translations, degrees for rotations


@dataclass(frozen=True)
class Observation:
    """Per-step sensor packet: the two camera views plus proprioception."""

    frontal: Optional["RenderedImage"]
    rear: Optional["RenderedImage"]
    x: float
    y: float
    z: float
    yaw: float
    collided: bool


def disc_hit(plan: FloorPlan, x: float, z: float, radius: float) -> Optional[Contact]:
    """Closest wall or furniture item the disc at (x, z) touches, if any."""
    best: Optional[Contact] = None
    best_dist = radius
    for wall in plan.walls:
        d = dist_point_segment(x, z, wall.a[0], wall.a[1], wall.b[0], wall.b[1])
        if d <= best_dist:
            best_dist = d
            best = Contact(wall.id, closest_point_on_segment(x, z, *wall.a, *wall.b))
    for item in plan.furniture:
        d = dist_point_rect(x, z, item.footprint)
        if d <= best_dist:
            best_dist = d
            best = Contact(item.id, closest_point_on_rect(x, z, item.footprint))
    return best


def compose_rotation(pose: DronePose, cmd: MotionCommand | str, rotation_convention: str = "b-right") -> DronePose:
    """Apply a rotation command to the yaw only. B turns right by default."""
    if isinstance(cmd, str):
        cmd = command(cmd)
    if cmd.code not in ROTATION_CODES:
        raise MotionError(f"{cmd.code} is not a rotation command")
    sign = -1.0 if cmd.kind == "rotate_right" else 1.0
    if rotation_convention == "b-left":
        sign = -sign
    return replace(pose, yaw=normalize_deg(pose.yaw + sign * cmd.magnitude))


def _translation_direction(pose: DronePose, cmd: MotionCommand) -> tuple[float, float]:
    if cmd.kind == "forward":
        return heading_vec(pose.yaw)
    if cmd.kind == "lateral_left":
        return heading_vec(pose.yaw + 90.0)
    if cmd.kind == "lateral_right":
        return heading_vec(pose.yaw - 90.0)
    raise MotionError(f"{cmd.code} is not a translation command")


def apply_motion(
    plan: FloorPlan,
    body: DroneBody,
    pose: DronePose,
    cmd: MotionCommand | str,
    config: SimConfig = SimConfig(),
) -> StepResult:
    """Execute one motion command against the plan geometry.

    Translations advance in sub-steps and stop at the last collision-free
    position before contact. Raises StartInCollisionError if the input pose
    already intersects geometry.
    """
    if isinstance(cmd, str):
        cmd = command(cmd)
    start_hit = disc_hit(plan, pose.x, pose.z, body.bounding_radius)
    if start_hit is not None:
        raise StartInCollisionError(
            f"pose ({pose.x:.3f}, {pose.z:.3f}) already touches {start_hit.obstacle_id!r}"
        )

    if cmd.code == "E":
        return StepResult(pose=pose, collided=False, contact=None, traveled=0.0)

    if cmd.code in ROTATION_CODES:
        new_pose = compose_rotation(pose, cmd, config.rotation_convention)
        return StepResult(pose=new_pose, collided=False, contact=None, traveled=cmd.magnitude)

    ux, uz = _translation_direction(pose, cmd)
    n_steps = max(1, math.ceil(cmd.magnitude / config.sub_step))
    free_d = 0.0
    for k in range(1, n_steps + 1):
        d = min(k * config.sub_step, cmd.magnitude)
        hit = disc_hit(plan, pose.x + d * ux, pose.z + d * uz, body.bounding_radius)
        if hit is not None:
            stopped = replace(pose, x=pose.x + free_d * ux, z=pose.z + free_d * uz)
            return StepResult(pose=stopped, collided=True, contact=hit, traveled=free_d)
        free_d = d
    moved = replace(pose, x=pose.x + cmd.magnitude * ux, z=pose.z + cmd.magnitude * uz)
    return StepResult(pose=moved, collided=False, contact=None, traveled=cmd.magnitude)


def forward_clearance(
    plan: FloorPlan,
    body: DroneBody,
    pose: DronePose,
    max_dist: float = 5.0,
    step: float = 0.02,
) -> float:
    """Largest forward travel (sampled at `step`) that stays collision-free."""
    ux, uz = heading_vec(pose.yaw)
    clear = 0.0
    d = step
    while d <= max_dist + 1e-12:
        if disc_hit(plan, pose.x + d * ux, pose.z + d * uz, body.bounding_radius) is not None:
            return clear
        clear = d
        d += step
    return clear


def observe(
    plan: FloorPlan,
    body: DroneBody,
    pose: DronePose,
    collided: bool = False,
    renderer: Optional["Renderer"] = None,
) -> Observation:
    """Package the per-step observation tuple; frames come from the injected renderer."""
    frontal = rear = None
    if renderer is not None:
        frontal = renderer.frontal(pose)
        rear = renderer.rear(pose)
    return Observation(
        frontal=frontal,
        rear=rear,
        x=pose.x,
        y=pose.y,
        z=pose.z,
        yaw=pose.yaw,
        collided=collided,
    )


class Simulator:
    """One episode's simulator session: a single mutable pose plus the last step.

    Drive it from one episode at a time; independent sessions may run
    concurrently (the plan itself is immutable).
    """

    def __init__(
        self,
        plan: FloorPlan,
        spawn: DronePose,
        body: DroneBody = DroneBody(),
        config: SimConfig = SimConfig(),
        renderer: Optional["Renderer"] = None,
        camera=None,
    ) -> None:
        self.plan = plan
        self.body = body
        self.config = config
        self.renderer = renderer
        self._camera = camera
        y_lo, y_hi = 0.2, plan.ceiling_height - 0.2
        if not (y_lo <= spawn.y <= y_hi):
            raise StartInCollisionError(
                f"spawn altitude {spawn.y} outside [{y_lo}, {y_hi}] for this plan"
            )
        hit = disc_hit(plan, spawn.x, spawn.z, body.bounding_radius)
        if hit is not None:
            raise StartInCollisionError(
                f"spawn ({spawn.x:.3f}, {spawn.z:.3f}) touches {hit.obstacle_id!r}"
            )
        self.pose = spawn
        self.last_collided = False
        self.last_result: Optional[StepResult] = None

    def step(self, cmd: MotionCommand | str) -> StepResult:
        result = apply_motion(self.plan, self.body, self.pose, cmd, self.config)
        self.pose = result.pose
        self.last_collided = result.collided
        self.last_result = result
        return result

    def observe(self) -> Observation:
        return observe(self.plan, self.body, self.pose, self.last_collided, self.renderer)

    def semantic(self) -> "SemanticObservation":
        from . import percept  # local import: percept depends on sim types

        camera = self._camera if self._camera is not None else percept.CameraModel()
        return percept.semantic_observe(self.plan, self.pose, camera)

    def close(self) -> None:  # symmetry with the remote session
        pass
