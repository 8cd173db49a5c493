"""Pilots: the decision layer of the navigation loop.

Three interchangeable implementations share one interface: a live
vision-language model over HTTP, a rule-based oracle with ground-truth access,
and a transcript replayer.
"""

from .base import Mission, MissionImpossible, Pilot, PilotError, PilotStep, StepContext
from .live import (
    HttpStatusError,
    LivePilot,
    LivePilotError,
    MissingApiKey,
    PilotConfig,
    RequestTimeout,
    RetriesExhausted,
    decide_live,
)
from .oracle import OraclePilot, decide_oracle
from .prompts import PromptBundle, build_prompt, output_text, state_text, system_text
from .replay import ReplayPilot, StepOutOfRange, decide_replay
from .response import (
    DOOR_POSITIONS,
    MissingField,
    NoObjectFound,
    PilotResponse,
    ResponseError,
    UnknownDoorPosition,
    UnknownMovement,
    UnknownState,
    parse_response,
    response_to_dict,
    serialize_response,
)
from .transcript import TranscriptError, TranscriptRecord, TranscriptWriter, read_transcript

__all__ = [
    "Mission",
    "MissionImpossible",
    "Pilot",
    "PilotError",
    "PilotStep",
    "StepContext",
    "PilotConfig",
    "LivePilot",
    "LivePilotError",
    "MissingApiKey",
    "RequestTimeout",
    "HttpStatusError",
    "RetriesExhausted",
    "decide_live",
    "OraclePilot",
    "decide_oracle",
    "ReplayPilot",
    "StepOutOfRange",
    "decide_replay",
    "PromptBundle",
    "build_prompt",
    "system_text",
    "state_text",
    "output_text",
    "PilotResponse",
    "ResponseError",
    "NoObjectFound",
    "MissingField",
    "UnknownMovement",
    "UnknownState",
    "UnknownDoorPosition",
    "DOOR_POSITIONS",
    "parse_response",
    "serialize_response",
    "response_to_dict",
    "TranscriptRecord",
    "TranscriptWriter",
    "TranscriptError",
    "read_transcript",
]
