"""Rule-based ground-truth pilot.

Drives the full state machine loop from plan geometry and the semantic
observation channel (never from pixels). Every decision it emits is valid for
the state it was asked under, by construction.
"""

from __future__ import annotations

import math
import time
from typing import Optional

from .. import fsm
from ..fsm import FsmState
from ..geometry import bearing_deg, signed_delta_deg
from ..percept import CameraModel, classify_door_position
from ..sim import DroneBody, DronePose, forward_clearance
from ..world import Door, FloorPlan, NoPathError, room_of, room_path, topological_map_of
from .base import Mission, MissionImpossible, Pilot, PilotStep, StepContext
from .response import PilotResponse, serialize_response

# Steering bands. The coarse band hands over to the next state's finer
# actuators (lateral 10 cm steps), since 15-degree rotations alone cannot land
# inside the 10%-of-half-image centering band.
COARSE_CENTER_DEG = 10.0
ROTATE_THRESHOLD_DEG = 10.0
DOOR_APPROACH_DISTANCE = 1.0
FORWARD_MARGIN = 0.06

_ROTATIONS = (
    ("B1", -15.0),
    ("B2", -45.0),
    ("B3", -90.0),
    ("C1", 15.0),
    ("C2", 45.0),
    ("C3", 90.0),
)


def _best_rotation(bearing: float, allowed: frozenset[str]) -> Optional[str]:
    """Rotation code minimizing the residual |bearing|, or None if none helps.

    Positive bearing means the target is to the right, which a B (rotate right)
    command reduces under the default convention.
    """
    best_code = None
    best_residual = abs(signed_delta_deg(bearing))
    for code, delta in _ROTATIONS:
        if code not in allowed:
            continue
        residual = abs(signed_delta_deg(bearing + delta))
        if residual < best_residual - 1e-9:
            best_residual = residual
            best_code = code
    return best_code


class OraclePilot(Pilot):
    name = "oracle"
    needs_image = False
    deterministic = True

    def __init__(
        self,
        plan: FloorPlan,
        mission: Mission,
        reach_distance: float = 1.2,
        reach_bearing: float = 15.0,
        camera: CameraModel = CameraModel(),
        body: DroneBody = DroneBody(),
    ) -> None:
        self.plan = plan
        self.mission = mission
        self.reach_distance = reach_distance
        self.reach_bearing = reach_bearing
        self.camera = camera
        self.body = body
        self.topo = topological_map_of(plan)
        self._crossing_from: Optional[str] = None  # room we were in when crossing began

        if mission.target_room not in self.topo.nodes:
            raise MissionImpossible(f"target room {mission.target_room!r} is not in the plan")
        if mission.target_object is not None:
            try:
                obj = plan.object_by_id(mission.target_object)
            except KeyError:
                raise MissionImpossible(
                    f"target object {mission.target_object!r} is not in the plan"
                ) from None
            if obj.room != mission.target_room:
                raise MissionImpossible(
                    f"object {mission.target_object!r} is in {obj.room!r}, "
                    f"not in target room {mission.target_room!r}"
                )

    # -- helpers --------------------------------------------------------------

    def _route_door(self, current_room: str) -> Door:
        try:
            path = room_path(self.topo, current_room, self.mission.target_room)
        except (KeyError, NoPathError) as exc:
            raise MissionImpossible(str(exc)) from exc
        next_room = path[1]
        doors = self.plan.doors_between(current_room, next_room)
        if not doors:
            raise MissionImpossible(f"no door between {current_room!r} and {next_room!r}")
        return doors[0]

    def _bearing_distance(self, pose: DronePose, point: tuple[float, float]) -> tuple[float, float]:
        b = bearing_deg(pose.x, pose.z, pose.yaw, point[0], point[1])
        d = math.hypot(point[0] - pose.x, point[1] - pose.z)
        return b, d

    def _forward_safe(self, pose: DronePose, magnitude: float) -> bool:
        clearance = forward_clearance(self.plan, self.body, pose, max_dist=magnitude + 0.3)
        return clearance >= magnitude + FORWARD_MARGIN

    def _progress_move(self, pose: DronePose, aim: Optional[tuple[float, float]], allowed: frozenset[str]) -> str:
        """A harmless allowed move: rotate toward the aim point, else inch forward."""
        if aim is not None:
            b, _ = self._bearing_distance(pose, aim)
            if abs(b) > ROTATE_THRESHOLD_DEG:
                rot = _best_rotation(b, allowed)
                if rot is not None:
                    return rot
        if "A1" in allowed and self._forward_safe(pose, 0.10):
            return "A1"
        for code in ("B1", "C1", "B2", "C2", "B3", "C3", "E"):
            if code in allowed:
                return code
        return sorted(allowed)[0]

    def _door_position_field(self, ctx: StepContext) -> str:
        doors = ctx.semantic.visible_doors
        if not doors:
            return "not_visible"
        return min(doors, key=lambda d: d.distance).position

    # -- decision entry point ---------------------------------------------------

    def decide(self, ctx: StepContext) -> PilotStep:
        start = time.perf_counter()
        pose = ctx.pose
        room = room_of(self.plan, pose.x, pose.z)
        handler = {
            FsmState.RECOGNIZE_ROOM: self._recognize_room,
            FsmState.SEARCH_OPEN_DOOR: self._search_open_door,
            FsmState.ORIENT_TOWARDS_DOOR: self._orient_towards_door,
            FsmState.GO_THROUGH_DOOR: self._go_through_door,
            FsmState.SEARCH_OBJECT: self._search_object,
            FsmState.REACH_OBJECT: self._reach_object,
            FsmState.STAY_ON_ROOM: self._hover_final,
            FsmState.DESCRIBE_OBJECT: self._hover_final,
        }[ctx.current_state]
        movement, next_state, description = handler(ctx, pose, room)

        response = PilotResponse(
            room=room,
            movement=movement,
            state=next_state,
            description=description,
            door_position=self._door_position_field(ctx),
        )
        violations = fsm.validate(ctx.current_state, fsm.TransitionDecision(movement, next_state))
        if violations:  # a policy bug, not a runtime condition
            raise AssertionError(f"oracle produced an invalid decision: {violations}")
        latency = (time.perf_counter() - start) * 1000.0
        return PilotStep(
            response=response,
            raw_text=serialize_response(response),
            prompt_digest="oracle",
            latency_ms=latency,
            attempts=1,
        )

    # -- per-state policy ---------------------------------------------------------

    def _recognize_room(self, ctx, pose, room):
        allowed = fsm.spec_of(FsmState.RECOGNIZE_ROOM).allowed_moves
        if room == self.mission.target_room:
            if self.mission.target_object is not None:
                obj = self.plan.object_by_id(self.mission.target_object)
                move = self._progress_move(pose, obj.position, allowed)
                return move, FsmState.SEARCH_OBJECT, (
                    f"Current room is the {room}; searching for the {obj.label}."
                )
            move = self._progress_move(pose, None, allowed)
            return move, FsmState.STAY_ON_ROOM, f"Current room is the {room}; target room reached."
        door = self._route_door(room)
        move = self._progress_move(pose, door.midpoint, allowed)
        return move, FsmState.SEARCH_OPEN_DOOR, (
            f"Current room is the {room}; heading for the door toward the goal."
        )

    def _search_open_door(self, ctx, pose, room):
        # The search state owns the coarse approach: it is the only door state
        # with a self-loop, so distance is closed here with A1 steps.
        if room == self.mission.target_room or room == "unknown":
            return "E", FsmState.ORIENT_TOWARDS_DOOR, "Already at the goal side of the door."
        door = self._route_door(room)
        b, d = self._bearing_distance(pose, door.midpoint)
        if abs(b) > COARSE_CENTER_DEG:
            rot = _best_rotation(b, fsm.spec_of(FsmState.SEARCH_OPEN_DOOR).allowed_moves)
            return (rot or ("B1" if b > 0 else "C1")), FsmState.SEARCH_OPEN_DOOR, (
                "Rotating to face the door toward the goal."
            )
        if d >= DOOR_APPROACH_DISTANCE and self._forward_safe(pose, 0.10):
            return "A1", FsmState.SEARCH_OPEN_DOOR, "Door ahead; closing the distance."
        return "E", FsmState.ORIENT_TOWARDS_DOOR, "Open door close ahead; switching to alignment."

    def _orient_towards_door(self, ctx, pose, room):
        # No self-loop here: each decision either starts/continues the crossing
        # (Go Through Door) or falls back to the search state.
        if room == self.mission.target_room or room == "unknown":
            return "A1", FsmState.GO_THROUGH_DOOR, "Pushing clear of the doorway."
        door = self._route_door(room)
        b, d = self._bearing_distance(pose, door.midpoint)
        centered = classify_door_position(b, self.camera) == "center"
        if centered or d < 0.3:
            if self._crossing_from is None:
                self._crossing_from = room
            return "A1", FsmState.GO_THROUGH_DOOR, "Doorway centered; crossing."
        if abs(b) >= ROTATE_THRESHOLD_DEG:
            return ("B1" if b > 0 else "C1"), FsmState.SEARCH_OPEN_DOOR, (
                "Doorway off-axis; rotating and re-searching."
            )
        # Small residual bearing: one lateral step shifts the doorway into the
        # band, then the search state hands straight back.
        return ("D2" if b > 0 else "D1"), FsmState.SEARCH_OPEN_DOOR, (
            "Sidestepping to center the doorway."
        )

    def _go_through_door(self, ctx, pose, room):
        if room != "unknown" and self._crossing_from is not None and room != self._crossing_from:
            self._crossing_from = None
            return "A1", FsmState.RECOGNIZE_ROOM, "Crossed the doorway into the next room."
        if room == self.mission.target_room:
            self._crossing_from = None
            return "A1", FsmState.RECOGNIZE_ROOM, "Arrived in the target room."
        if self._crossing_from is None:
            self._crossing_from = room
        return "A1", FsmState.ORIENT_TOWARDS_DOOR, "Moving straight through the doorway."

    def _search_object(self, ctx, pose, room):
        obj = self.plan.object_by_id(self.mission.target_object)
        b, d = self._bearing_distance(pose, obj.position)
        if abs(b) <= COARSE_CENTER_DEG:
            if d > self.reach_distance + 0.3 and self._forward_safe(pose, 0.25):
                move = "A2"
            elif self._forward_safe(pose, 0.10):
                move = "A1"
            else:
                move = "B1" if b >= 0 else "C1"
            return move, FsmState.REACH_OBJECT, f"The {obj.label} is roughly centered; approaching."
        rot = _best_rotation(b, fsm.spec_of(FsmState.SEARCH_OBJECT).allowed_moves)
        if rot is None:
            rot = "B1" if b > 0 else "C1"
        return rot, FsmState.SEARCH_OBJECT, f"Scanning the room for the {obj.label}."

    def _reach_object(self, ctx, pose, room):
        obj = self.plan.object_by_id(self.mission.target_object)
        b, d = self._bearing_distance(pose, obj.position)
        if d <= self.reach_distance and abs(b) <= self.reach_bearing:
            return "E", FsmState.DESCRIBE_OBJECT, f"The {obj.label} is close and centered."
        if abs(b) > 12.0:
            return ("B1" if b > 0 else "C1"), FsmState.REACH_OBJECT, f"Re-centering the {obj.label}."
        if self._forward_safe(pose, 0.10):
            return "A1", FsmState.REACH_OBJECT, f"Closing in on the {obj.label}."
        return ("D2" if b > 0 else "D1"), FsmState.REACH_OBJECT, "Sidestepping an obstruction."

    def _hover_final(self, ctx, pose, room):
        if ctx.current_state is FsmState.DESCRIBE_OBJECT and self.mission.target_object:
            obj = self.plan.object_by_id(self.mission.target_object)
            b, d = self._bearing_distance(pose, obj.position)
            side = "ahead" if abs(b) <= 15 else ("to the right" if b > 0 else "to the left")
            desc = f"A {obj.label} is visible {side}, about {d:.1f} m away, in the {room}."
        else:
            desc = f"Hovering in the {room}; the goal is complete."
        return "E", FsmState.FINAL, desc


def decide_oracle(
    plan: FloorPlan,
    pose: DronePose,
    semantic,
    current_state: FsmState,
    mission: Mission,
    **kwargs,
) -> PilotResponse:
    """One-shot functional form of the oracle policy (stateless callers)."""
    pilot = OraclePilot(plan, mission, **kwargs)
    ctx = StepContext(
        step=0,
        query_text="",
        map_json="",
        current_state=current_state,
        previous_state="None",
        previous_movement="None",
        pose=pose,
        semantic=semantic,
    )
    return pilot.decide(ctx).response
