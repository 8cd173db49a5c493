"""Shared pilot interface: every decision layer consumes a StepContext and
returns a PilotStep wrapping the validated response plus bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from ..fsm import FsmState
from ..sim import DronePose

if TYPE_CHECKING:  # pragma: no cover
    from ..percept import SemanticObservation
    from .response import PilotResponse


class PilotError(Exception):
    """Base for pilot-side failures the harness maps to a ProtocolError outcome."""


class MissionImpossible(PilotError):
    """The mission target does not exist in the plan or cannot be reached."""


@dataclass(frozen=True)
class Mission:
    target_room: str
    target_object: Optional[str] = None


@dataclass(frozen=True)
class StepContext:
    """Everything a pilot may look at for one decision."""

    step: int
    query_text: str
    map_json: str
    current_state: FsmState
    previous_state: str  # display name of the previous state, or "None"
    previous_movement: str  # command code, or "None"
    pose: DronePose
    semantic: "SemanticObservation"
    frontal_b64: Optional[str] = None  # present only for pilots with needs_image


@dataclass(frozen=True)
class PilotStep:
    response: "PilotResponse"
    raw_text: str
    prompt_digest: str
    latency_ms: float
    attempts: int


class Pilot:
    """Decision-layer interface; one instance drives one episode at a time."""

    name = "pilot"
    needs_image = False
    deterministic = True

    def decide(self, ctx: StepContext) -> PilotStep:
        raise NotImplementedError

    def close(self) -> None:
        pass
