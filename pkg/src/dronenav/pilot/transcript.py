"""Episode transcripts: one JSON line per step, preceded by a header line.

Transcripts are the exchange format between live runs and the replay pilot,
and double as the audit trail for every episode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Optional

from ..fsm import FsmState, normalize_state_name
from .base import PilotError
from .response import PilotResponse, response_to_dict

TRANSCRIPT_VERSION = 1


class TranscriptError(PilotError):
    """The transcript file is malformed or inconsistent."""


@dataclass(frozen=True)
class TranscriptRecord:
    step: int
    state: str  # display name of the state the decision was requested under
    prompt_digest: str
    raw: str
    response: PilotResponse
    valid: bool
    violations: tuple[str, ...]
    latency_ms: float
    attempts: int

    def to_dict(self) -> dict:
        return {
            "kind": "step",
            "step": self.step,
            "state": self.state,
            "prompt_digest": self.prompt_digest,
            "raw": self.raw,
            "response": response_to_dict(self.response),
            "valid": self.valid,
            "violations": list(self.violations),
            "latency_ms": self.latency_ms,
            "attempts": self.attempts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TranscriptRecord":
        resp = data["response"]
        state = normalize_state_name(resp["state"])
        if state is None:
            raise TranscriptError(f"record {data.get('step')}: unknown state {resp['state']!r}")
        return cls(
            step=int(data["step"]),
            state=str(data["state"]),
            prompt_digest=str(data.get("prompt_digest", "")),
            raw=str(data.get("raw", "")),
            response=PilotResponse(
                room=resp["room"],
                movement=resp["movement"],
                state=state,
                description=resp["description"],
                door_position=resp["door_position"],
            ),
            valid=bool(data.get("valid", True)),
            violations=tuple(data.get("violations", [])),
            latency_ms=float(data.get("latency_ms", 0.0)),
            attempts=int(data.get("attempts", 1)),
        )


class TranscriptWriter:
    """Append-only writer; the header goes out immediately on open."""

    def __init__(self, path: str | Path, header: dict) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh: Optional[IO[str]] = self.path.open("w", encoding="utf-8")
        payload = {"kind": "header", "version": TRANSCRIPT_VERSION}
        payload.update(header)
        self._write(payload)

    def _write(self, payload: dict) -> None:
        assert self._fh is not None
        self._fh.write(json.dumps(payload, sort_keys=True) + "\n")
        self._fh.flush()

    def write(self, record: TranscriptRecord) -> None:
        self._write(record.to_dict())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "TranscriptWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_transcript(path: str | Path) -> tuple[dict, list[TranscriptRecord]]:
    p = Path(path)
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise TranscriptError(f"cannot read transcript {p}: {exc}") from exc
    if not lines:
        raise TranscriptError(f"{p}: empty transcript")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TranscriptError(f"{p}: bad header line: {exc}") from exc
    if header.get("kind") != "header":
        raise TranscriptError(f"{p}: first line is not a header")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TranscriptError(f"{p}:{i}: bad record: {exc}") from exc
        if data.get("kind") != "step":
            continue
        records.append(TranscriptRecord.from_dict(data))
    records.sort(key=lambda r: r.step)
    return header, records
