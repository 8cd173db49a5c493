"""The drone controller's finite-state machine, encoded as data.

Every state carries its goal text, the movement commands a pilot may issue
there, and the states it may transition into. Pilot decisions are validated
against this table; the prompt builder renders its command lists from the
same table so the two can never disagree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class FsmState(Enum):
    START = "Start"
    RECOGNIZE_ROOM = "Recognize Room"
    SEARCH_OPEN_DOOR = "Search Open Door"
    ORIENT_TOWARDS_DOOR = "Orient Towards Door"
    GO_THROUGH_DOOR = "Go Through Door"
    STAY_ON_ROOM = "Stay on Room"
    SEARCH_OBJECT = "Search Object"
    REACH_OBJECT = "Reach Object"
    DESCRIBE_OBJECT = "Describe Object"
    FINAL = "Final"

    @property
    def display_name(self) -> str:
        return self.value


@dataclass(frozen=True)
class StateSpec:
    state: FsmState
    goal_text: str
    allowed_moves: frozenset[str]
    next_states: frozenset[FsmState]


@dataclass(frozen=True)
class TransitionDecision:
    movement: str  # a motion command code, e.g. "A1"
    next_state: FsmState


def _spec(state: FsmState, goal: str, moves: str, nexts: tuple[FsmState, ...]) -> StateSpec:
    return StateSpec(
        state=state,
        goal_text=goal,
        allowed_moves=frozenset(moves.split()),
        next_states=frozenset(nexts),
    )


# The controller's behavior table. Terminal pre-final states (Stay on Room,
# Describe Object) only hover (E) and then finish.
STATE_TABLE: dict[FsmState, StateSpec] = {
    spec.state: spec
    for spec in (
        _spec(
            FsmState.RECOGNIZE_ROOM,
            "Identify the current room.",
            "A1 B1 B2 B3 C1 C2 C3",
            (FsmState.STAY_ON_ROOM, FsmState.SEARCH_OBJECT, FsmState.SEARCH_OPEN_DOOR),
        ),
        _spec(
            FsmState.STAY_ON_ROOM,
            "Remain stationary in the target room.",
            "E",
            (FsmState.FINAL,),
        ),
        _spec(
            FsmState.SEARCH_OBJECT,
            "Scan the current room to locate and center the desired object in the field of view.",
            "A1 A2 B1 B2 B3 C1 C2 C3",
            (FsmState.SEARCH_OBJECT, FsmState.REACH_OBJECT),
        ),
        _spec(
            FsmState.REACH_OBJECT,
            "Approach and align with the object.",
            "A1 B1 C1 D1 D2 E",
            (FsmState.DESCRIBE_OBJECT, FsmState.SEARCH_OBJECT, FsmState.REACH_OBJECT),
        ),
        _spec(
            FsmState.DESCRIBE_OBJECT,
            "Stop and describe the object.",
            "E",
            (FsmState.FINAL,),
        ),
        _spec(
            FsmState.SEARCH_OPEN_DOOR,
            "Look for an open door to the goal.",
            "A1 B1 B2 B3 C1 C2 C3 E",
            (FsmState.SEARCH_OPEN_DOOR, FsmState.ORIENT_TOWARDS_DOOR),
        ),
        _spec(
            FsmState.ORIENT_TOWARDS_DOOR,
            "Align with the open door.",
            "A1 B1 C1 D1 D2",
            (FsmState.GO_THROUGH_DOOR, FsmState.SEARCH_OPEN_DOOR),
        ),
        _spec(
            FsmState.GO_THROUGH_DOOR,
            "Enter the next room through the door.",
            "A1",
            # "Position in Center of Room" is an alias of Recognize Room: after
            # crossing, the drone re-identifies the room it is in.
            (FsmState.RECOGNIZE_ROOM, FsmState.ORIENT_TOWARDS_DOOR),
        ),
    )
}

FINAL_STATES = frozenset({FsmState.FINAL})
PRE_FINAL_STATES = frozenset(
    {s for s, spec in STATE_TABLE.items() if spec.next_states == frozenset({FsmState.FINAL})}
)


_ALIASES = {
    "start": FsmState.START,
    "recognizeroom": FsmState.RECOGNIZE_ROOM,
    "positionincenterofroom": FsmState.RECOGNIZE_ROOM,
    "searchopendoor": FsmState.SEARCH_OPEN_DOOR,
    "orienttowardsdoor": FsmState.ORIENT_TOWARDS_DOOR,
    "orientedtowardsdoor": FsmState.ORIENT_TOWARDS_DOOR,
    "gothroughdoor": FsmState.GO_THROUGH_DOOR,
    "stayonroom": FsmState.STAY_ON_ROOM,
    "searchobject": FsmState.SEARCH_OBJECT,
    "reachobject": FsmState.REACH_OBJECT,
    "describeobject": FsmState.DESCRIBE_OBJECT,
    "final": FsmState.FINAL,
}


def normalize_state_name(name: str) -> Optional[FsmState]:
    """Match a state name ignoring case, whitespace, and separators."""
    key = re.sub(r"[^a-z]", "", name.lower())
    return _ALIASES.get(key)


def spec_of(state: FsmState) -> StateSpec:
    """The behavior-table row for a state. Final and Start have none."""
    if state is FsmState.FINAL:
        raise KeyError("Final is terminal and has no state spec")
    if state is FsmState.START:
        raise KeyError("Start resolves immediately via initial_state and has no spec")
    return STATE_TABLE[state]


def validate(current: FsmState, decision: TransitionDecision) -> list[str]:
    """Check a pilot decision against the table; empty list means valid."""
    spec = spec_of(current)
    violations = []
    if decision.movement not in spec.allowed_moves:
        allowed = ", ".join(sorted(spec.allowed_moves))
        violations.append(
            f"move {decision.movement} not allowed in {current.display_name} (allowed: {allowed})"
        )
    if decision.next_state not in spec.next_states:
        reachable = ", ".join(sorted(s.display_name for s in spec.next_states))
        violations.append(
            f"next_state {decision.next_state.display_name} not reachable from "
            f"{current.display_name} (reachable: {reachable})"
        )
    return violations


def initial_state(query=None) -> FsmState:
    """Entry point of every episode; the query content does not change it."""
    return FsmState.RECOGNIZE_ROOM


def dump_table() -> str:
    """Stable tabular rendering of the state table (the `fsm dump` CLI output)."""
    rows = []
    for state in sorted(STATE_TABLE, key=lambda s: s.display_name):
        spec = STATE_TABLE[state]
        rows.append(
            (
                state.display_name,
                " ".join(sorted(spec.allowed_moves)),
                ", ".join(sorted(s.display_name for s in spec.next_states)),
            )
        )
    headers = ("State", "Allowed moves", "Next states")
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(3)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    sep = "  ".join("-" * w for w in widths)
    body = "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows)
    return f"{line}\n{sep}\n{body}\n"
