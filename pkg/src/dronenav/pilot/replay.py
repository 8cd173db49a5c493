"""Transcript replay pilot: feeds recorded decisions back through the loop.

Replays are deterministic regression material: an unchanged simulator will
reproduce the original episode exactly; a response that violates the FSM makes
the harness end the episode with a protocol error at that step.
"""

from __future__ import annotations

from pathlib import Path

from .base import Pilot, PilotError, PilotStep, StepContext
from .response import PilotResponse
from .transcript import TranscriptRecord, read_transcript


class StepOutOfRange(PilotError):
    def __init__(self, step: int, available: int) -> None:
        self.step = step
        super().__init__(f"transcript has no record for step {step} ({available} steps stored)")


def decide_replay(records: list[TranscriptRecord], step: int) -> PilotResponse:
    """The stored response for one step, verbatim."""
    if 0 <= step < len(records) and records[step].step == step:
        return records[step].response
    for rec in records:
        if rec.step == step:
            return rec.response
    raise StepOutOfRange(step, len(records))


class ReplayPilot(Pilot):
    name = "replay"
    needs_image = False
    deterministic = True

    def __init__(self, transcript_path: str | Path) -> None:
        self.transcript_path = Path(transcript_path)
        self.header, self.records = read_transcript(transcript_path)

    def decide(self, ctx: StepContext) -> PilotStep:
        response = decide_replay(self.records, ctx.step)
        record = self.records[ctx.step] if ctx.step < len(self.records) else None
        raw = record.raw if record is not None and record.step == ctx.step else ""
        return PilotStep(
            response=response,
            raw_text=raw,
            prompt_digest="replay",
            latency_ms=0.0,
            attempts=1,
        )
