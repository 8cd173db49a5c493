"""Parsing and serialization of the five-field pilot decision record.

The parser is deliberately forgiving about the wrapper (prose, code fences,
Python-style dicts) and strict about the fields: unknown movement codes, state
names, or door positions raise typed errors instead of being guessed at.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass

from ..fsm import FsmState, normalize_state_name
from ..sim import COMMANDS
from .base import PilotError

DOOR_POSITIONS = ("left", "center", "right", "not_visible")

REQUIRED_FIELDS = ("room", "movement", "state", "description", "door_position")


class ResponseError(PilotError):
    """A pilot response could not be turned into a valid decision record."""


class NoObjectFound(ResponseError):
    def __init__(self) -> None:
        super().__init__("no JSON object found in the response")


class MissingField(ResponseError):
    def __init__(self, name: str) -> None:
        self.field = name
        super().__init__(f"response object is missing field {name!r}")


class UnknownMovement(ResponseError):
    def __init__(self, code: str) -> None:
        self.code = code
        super().__init__(f"unknown movement command {code!r}")


class UnknownState(ResponseError):
    def __init__(self, name: str) -> None:
        self.state_name = name
        super().__init__(f"unknown FSM state {name!r}")


class UnknownDoorPosition(ResponseError):
    def __init__(self, value: str) -> None:
        self.value = value
        super().__init__(f"unknown door position {value!r}")


@dataclass(frozen=True)
class PilotResponse:
    room: str
    movement: str  # motion command code
    state: FsmState  # predicted next state
    description: str
    door_position: str  # left | center | right | not_visible


def _candidate_objects(raw: str):
    """Yield parsed dicts for every balanced {...} span, left to right."""
    i = 0
    n = len(raw)
    while i < n:
        if raw[i] != "{":
            i += 1
            continue
        depth = 0
        in_string: str | None = None
        escaped = False
        end = None
        for j in range(i, n):
            ch = raw[j]
            if in_string is not None:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == in_string:
                    in_string = None
                continue
            if ch in "\"'":
                in_string = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    end = j
                    break
        if end is None:
            return
        span = raw[i : end + 1]
        parsed = None
        try:
            parsed = json.loads(span)
        except (json.JSONDecodeError, ValueError):
            try:
                parsed = ast.literal_eval(span)
            except (ValueError, SyntaxError, MemoryError, RecursionError):
                parsed = None
        if isinstance(parsed, dict):
            yield parsed
            i = end + 1
        else:
            i += 1


def parse_response(raw: str) -> PilotResponse:
    """Extract the first well-formed decision object from raw model output.

    Tolerates surrounding prose and triple-backtick fences; matches field names
    case-insensitively and state names after whitespace/case normalization.
    """
    obj = None
    for candidate in _candidate_objects(raw):
        obj = candidate
        break
    if obj is None:
        raise NoObjectFound()

    fields = {str(k).strip().lower(): v for k, v in obj.items()}
    for name in REQUIRED_FIELDS:
        if name not in fields or fields[name] is None:
            raise MissingField(name)

    movement = str(fields["movement"]).strip().upper()
    if movement not in COMMANDS:
        raise UnknownMovement(str(fields["movement"]).strip())

    state = normalize_state_name(str(fields["state"]))
    if state is None:
        raise UnknownState(str(fields["state"]).strip())

    door = str(fields["door_position"]).strip().lower().replace(" ", "_").replace("-", "_")
    if door not in DOOR_POSITIONS:
        raise UnknownDoorPosition(str(fields["door_position"]).strip())

    return PilotResponse(
        room=str(fields["room"]).strip(),
        movement=movement,
        state=state,
        description=str(fields["description"]),
        door_position=door,
    )


def response_to_dict(r: PilotResponse) -> dict:
    return {
        "room": r.room,
        "movement": r.movement,
        "state": r.state.display_name,
        "description": r.description,
        "door_position": r.door_position,
    }


def serialize_response(r: PilotResponse) -> str:
    """Canonical JSON form; parse_response round-trips it exactly."""
    return json.dumps(response_to_dict(r), sort_keys=True)
