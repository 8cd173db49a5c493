"""Three-part prompt assembly for live vision-language pilots.

The system and output blocks are fixed text assets; the state block is
templated from the FSM behavior table so the prompt's allowed-command and
next-state lists can never drift from what the validator enforces.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from ..fsm import FsmState, spec_of
from ..sim import command_description
from ..world import TopologicalMap, serialize_topological_map

PROMPT_VARIANTS = ("default", "close-approach")

_GROUP_TITLES = {
    "A": "Forward movement",
    "B": "rotation",  # direction filled in from the rotation convention
    "C": "rotation",
    "D": "Lateral movement",
    "E": "Hover",
}

_STATE_RULES: dict[FsmState, list[str]] = {
    FsmState.RECOGNIZE_ROOM: [
        "Use the image and the topological map to decide which room the robot is currently in.",
        "Use short forward movements or in-place rotations to gather more views if the room is ambiguous.",
        'Report the room as "unknown" only if nothing in view identifies it.',
    ],
    FsmState.STAY_ON_ROOM: [
        "The target room has been reached; remain stationary.",
    ],
    FsmState.SEARCH_OBJECT: [
        "Use short forward movements or in-place rotations to explore the surroundings.",
        "Prefer rotating in the same direction as the previous rotation if applicable "
        "(e.g., if `previous_movement` was `B2`, use `B1`, `B2`, or `B3`).",
        "Alternate between rotating and moving forward if the object has not been seen in the last 3 steps.",
        "If the object is partially visible but not centered, rotate slightly to center it.",
    ],
    FsmState.REACH_OBJECT: [
        "Approach the object with short forward steps while keeping it centered.",
        "Use small rotations or lateral steps to correct drift.",
        "Stop when the object is close and well framed.",
    ],
    FsmState.DESCRIBE_OBJECT: [
        "The object has been reached; hover and describe its position and appearance.",
    ],
    FsmState.SEARCH_OPEN_DOOR: [
        "Scan the room with rotations to find an open door that leads toward the target room.",
        "Use the topological map to pick the door whose next room lies on the route to the goal.",
        "Prefer rotating in the same direction as the previous rotation if applicable.",
    ],
    FsmState.ORIENT_TOWARDS_DOOR: [
        "Align the drone with the open door before crossing it.",
        "Use small lateral steps (D1/D2) and small rotations (B1/C1) to center the doorway, "
        "and short forward steps to close the distance.",
        "Keep the doorway centered while approaching.",
    ],
    FsmState.GO_THROUGH_DOOR: [
        "Move straight forward through the open doorway.",
        "Keep crossing until the drone is clearly inside the next room.",
    ],
}

_CLOSE_APPROACH_RULE = (
    "Approach the doorway more closely before making fine alignment adjustments; "
    "do not keep re-centering from a distance."
)

_NEXT_STATE_GUIDANCE: dict[tuple[FsmState, FsmState], str] = {
    (FsmState.RECOGNIZE_ROOM, FsmState.STAY_ON_ROOM):
        "if the current room is the target room and no object must be found.",
    (FsmState.RECOGNIZE_ROOM, FsmState.SEARCH_OBJECT):
        "if the current room is the target room and a specific object must be located.",
    (FsmState.RECOGNIZE_ROOM, FsmState.SEARCH_OPEN_DOOR):
        "if the target room is different from the current room.",
    (FsmState.STAY_ON_ROOM, FsmState.FINAL):
        "always: hover once and finish.",
    (FsmState.SEARCH_OBJECT, FsmState.SEARCH_OBJECT):
        "if the target object is not yet visible or not centered in the frame.",
    (FsmState.SEARCH_OBJECT, FsmState.REACH_OBJECT):
        "if the object is clearly visible and approximately centered in the image "
        "(i.e., within +-10 % of the center).",
    (FsmState.REACH_OBJECT, FsmState.DESCRIBE_OBJECT):
        "if the object is close enough and properly framed.",
    (FsmState.REACH_OBJECT, FsmState.SEARCH_OBJECT):
        "if the object was lost from view.",
    (FsmState.REACH_OBJECT, FsmState.REACH_OBJECT):
        "if the object is visible but still too far away.",
    (FsmState.DESCRIBE_OBJECT, FsmState.FINAL):
        "always: hover once and finish.",
    (FsmState.SEARCH_OPEN_DOOR, FsmState.SEARCH_OPEN_DOOR):
        "if no suitable open door is visible yet or it is far from the image center.",
    (FsmState.SEARCH_OPEN_DOOR, FsmState.ORIENT_TOWARDS_DOOR):
        "if a suitable open door is clearly visible and roughly centered.",
    (FsmState.ORIENT_TOWARDS_DOOR, FsmState.GO_THROUGH_DOOR):
        "if the doorway is centered and close enough to cross safely.",
    (FsmState.ORIENT_TOWARDS_DOOR, FsmState.SEARCH_OPEN_DOOR):
        "if the door was lost from view.",
    (FsmState.GO_THROUGH_DOOR, FsmState.RECOGNIZE_ROOM):
        "once the drone has entered the next room.",
    (FsmState.GO_THROUGH_DOOR, FsmState.ORIENT_TOWARDS_DOOR):
        "if the crossing drifted off line and alignment must be redone.",
}

_STATE_NOTES: dict[FsmState, list[str]] = {
    FsmState.RECOGNIZE_ROOM: [
        "Prefer small rotations over forward motion while the room is still uncertain.",
    ],
    FsmState.SEARCH_OBJECT: [
        "Avoid unnecessary movement: do not move forward if the object might be occluded "
        "or outside the frame.",
    ],
    FsmState.ORIENT_TOWARDS_DOOR: [
        "Do not cross while the doorway is off-center; clipping the frame causes a collision.",
    ],
}


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    state_text: str
    output_text: str
    user_query: str
    map_serialization: str
    previous_state: str
    previous_movement: str
    frontal_image_b64: Optional[str]
    current_state: FsmState

    def context_text(self) -> str:
        return (
            "## CONTEXT\n\n"
            f'- User query: "{self.user_query}"\n'
            f"- Topological map: {self.map_serialization}\n"
            f"- Current FSM state: {self.current_state.display_name}\n"
            f"- Previous FSM state: {self.previous_state}\n"
            f"- Previous movement: {self.previous_movement}\n"
        )

    def user_text(self) -> str:
        return f"{self.state_text}\n\n{self.output_text}\n\n{self.context_text()}"

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (
            self.system_text,
            self.state_text,
            self.output_text,
            self.user_query,
            self.map_serialization,
            self.previous_state,
            self.previous_movement,
            self.frontal_image_b64 or "",
            self.current_state.display_name,
        ):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files("dronenav.pilot").joinpath(f"templates/{name}").read_text("utf-8")


def system_text() -> str:
    return _template("system.txt")


def output_text() -> str:
    return _template("output.txt")


def _movement_section(codes: frozenset[str], rotation_convention: str) -> str:
    lines = ["## MOVEMENT COMMANDS", "", "Only return **ONE** movement command from the list below:", ""]
    for letter in "ABCDE":
        group = sorted(c for c in codes if c.startswith(letter))
        if not group:
            continue
        title = _GROUP_TITLES[letter]
        if letter in "BC":
            desc = command_description(group[0], rotation_convention)
            title = ("Right " if "right" in desc else "Left ") + title
        lines.append(f"### {letter}. {title}:")
        for code in group:
            lines.append(f"- `{code}`: {command_description(code, rotation_convention)}")
        lines.append("")
    return "\n".join(lines).rstrip()


def state_text(
    state: FsmState,
    variant: str = "default",
    rotation_convention: str = "b-right",
) -> str:
    """Render the per-state prompt block from the FSM behavior table."""
    if variant not in PROMPT_VARIANTS:
        raise ValueError(f"unknown prompt variant {variant!r}")
    spec = spec_of(state)
    rules = list(_STATE_RULES[state])
    if variant == "close-approach" and state in (
        FsmState.SEARCH_OPEN_DOOR,
        FsmState.ORIENT_TOWARDS_DOOR,
    ):
        rules.append(_CLOSE_APPROACH_RULE)

    parts = [
        f"## State: **{state.display_name}**",
        "",
        "---",
        "",
        "## GOAL",
        spec.goal_text,
        "",
        "---",
        "",
        "## POLICY RULES",
        "",
        *(f"- {rule}" for rule in rules),
        "",
        "---",
        "",
        _movement_section(spec.allowed_moves, rotation_convention),
        "",
        "---",
        "",
        "## OUTPUT STATE RULES",
        "",
        "Choose the next FSM state based on what the robot sees:",
        "",
    ]
    for nxt in sorted(spec.next_states, key=lambda s: s.display_name):
        guidance = _NEXT_STATE_GUIDANCE[(state, nxt)]
        parts.append(f"- `{nxt.display_name}`: {guidance}")
    notes = _STATE_NOTES.get(state, [])
    if notes:
        parts += ["", "---", "", "## NOTES", ""]
        parts += [f"- {note}" for note in notes]
    return "\n".join(parts) + "\n"


def build_prompt(
    query: str,
    topo_map: TopologicalMap | str,
    current_state: FsmState,
    previous_state: str,
    previous_movement: str,
    frontal_image_b64: Optional[str],
    variant: str = "default",
    rotation_convention: str = "b-right",
) -> PromptBundle:
    """Assemble the three prompt parts plus the dynamic per-step inputs."""
    map_json = (
        topo_map if isinstance(topo_map, str) else serialize_topological_map(topo_map)
    )
    return PromptBundle(
        system_text=system_text(),
        state_text=state_text(current_state, variant, rotation_convention),
        output_text=output_text(),
        user_query=query,
        map_serialization=map_json,
        previous_state=previous_state,
        previous_movement=previous_movement,
        frontal_image_b64=frontal_image_b64,
        current_state=current_state,
    )
