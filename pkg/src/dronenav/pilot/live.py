"""Live vision-language pilot speaking OpenAI- or Gemini-style chat HTTP APIs.

Each step is one single-turn request carrying the three prompt parts and the
frontal frame. Invalid answers are re-asked with the violation text appended,
up to the configured retry budget; an exhausted budget surfaces as a protocol
error on the episode.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Optional

import httpx

from .. import fsm
from .base import Pilot, PilotError, PilotStep, StepContext
from .prompts import PromptBundle, build_prompt
from .response import PilotResponse, ResponseError, parse_response

LIVE_PROVIDERS = ("openai-compatible", "gemini-compatible")

_DEFAULT_ENDPOINTS = {
    "openai-compatible": "https://api.openai.com/v1",
    "gemini-compatible": "https://generativelanguage.googleapis.com/v1beta",
}

_KEY_ENV = {
    "openai-compatible": "OPENAI_API_KEY",
    "gemini-compatible": "GEMINI_API_KEY",
}


class LivePilotError(PilotError):
    """Base for transport and protocol failures of the live pilot."""


class MissingApiKey(LivePilotError):
    def __init__(self, env: str) -> None:
        super().__init__(f"environment variable {env} is not set")


class RequestTimeout(LivePilotError):
    pass


class HttpStatusError(LivePilotError):
    def __init__(self, status: int, body: str) -> None:
        self.status = status
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")


class RetriesExhausted(LivePilotError):
    def __init__(self, attempts: int, violations: list[str]) -> None:
        self.attempts = attempts
        self.violations = violations
        super().__init__(
            f"no valid response after {attempts} attempts; last violations: {violations}"
        )


@dataclass(frozen=True)
class PilotConfig:
    provider: str = "oracle"  # openai-compatible | gemini-compatible | oracle | replay
    model: str = "gpt-4.1"
    endpoint: str = ""
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    prompt_variant: str = "default"
    transcript: Optional[str] = None  # replay source
    extra_headers: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def resolved_endpoint(self) -> str:
        return (self.endpoint or _DEFAULT_ENDPOINTS[self.provider]).rstrip("/")

    def api_key(self) -> str:
        env = _KEY_ENV[self.provider]
        key = os.environ.get(env, "")
        if not key:
            raise MissingApiKey(env)
        return key


def _openai_payload(config: PilotConfig, bundle: PromptBundle, feedback: list[tuple[str, str]]) -> dict:
    content: list[dict] = [{"type": "text", "text": bundle.user_text()}]
    if bundle.frontal_image_b64:
        content.append(
            {
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{bundle.frontal_image_b64}"},
            }
        )
    messages = [
        {"role": "system", "content": bundle.system_text},
        {"role": "user", "content": content},
    ]
    for raw, complaint in feedback:
        messages.append({"role": "assistant", "content": raw})
        messages.append({"role": "user", "content": complaint})
    return {"model": config.model, "temperature": config.temperature, "messages": messages}


def _gemini_payload(config: PilotConfig, bundle: PromptBundle, feedback: list[tuple[str, str]]) -> dict:
    parts: list[dict] = [{"text": bundle.system_text + "\n\n" + bundle.user_text()}]
    if bundle.frontal_image_b64:
        parts.append({"inline_data": {"mime_type": "image/png", "data": bundle.frontal_image_b64}})
    contents = [{"role": "user", "parts": parts}]
    for raw, complaint in feedback:
        contents.append({"role": "model", "parts": [{"text": raw}]})
        contents.append({"role": "user", "parts": [{"text": complaint}]})
    return {"contents": contents, "generationConfig": {"temperature": config.temperature}}


def _extract_text(config: PilotConfig, data: dict) -> str:
    try:
        if config.provider == "openai-compatible":
            return data["choices"][0]["message"]["content"]
        parts = data["candidates"][0]["content"]["parts"]
        return "".join(p.get("text", "") for p in parts)
    except (KeyError, IndexError, TypeError) as exc:
        raise LivePilotError(f"malformed provider response: {exc}") from exc


def _request(config: PilotConfig, client: httpx.Client, bundle: PromptBundle,
             feedback: list[tuple[str, str]]) -> str:
    endpoint = config.resolved_endpoint()
    headers = dict(config.extra_headers)
    if config.provider == "openai-compatible":
        url = f"{endpoint}/chat/completions"
        headers["Authorization"] = f"Bearer {config.api_key()}"
        payload = _openai_payload(config, bundle, feedback)
    else:
        url = f"{endpoint}/models/{config.model}:generateContent"
        headers["x-goog-api-key"] = config.api_key()
        payload = _gemini_payload(config, bundle, feedback)
    try:
        resp = client.post(url, json=payload, headers=headers, timeout=config.timeout)
    except httpx.TimeoutException as exc:
        raise RequestTimeout(str(exc)) from exc
    except httpx.HTTPError as exc:
        raise LivePilotError(f"transport failure: {exc}") from exc
    if resp.status_code != 200:
        raise HttpStatusError(resp.status_code, resp.text)
    return _extract_text(config, resp.json())


def decide_live(
    config: PilotConfig,
    bundle: PromptBundle,
    client: Optional[httpx.Client] = None,
) -> tuple[PilotResponse, str, int, float]:
    """One decision via the configured provider.

    Returns (response, last raw text, attempts used, latency ms). Parse or FSM
    violations trigger a re-ask with the complaint appended; the retry budget
    is max_retries re-asks on top of the first attempt.
    """
    if config.provider not in LIVE_PROVIDERS:
        raise ValueError(f"not a live provider: {config.provider!r}")
    owns_client = client is None
    client = client or httpx.Client()
    feedback: list[tuple[str, str]] = []
    started = time.perf_counter()
    last_violations: list[str] = []
    try:
        for attempt in range(1, config.max_retries + 2):
            raw = _request(config, client, bundle, feedback)
            try:
                response = parse_response(raw)
                violations = fsm.validate(
                    bundle.current_state,
                    fsm.TransitionDecision(response.movement, response.state),
                )
            except ResponseError as exc:
                violations = [str(exc)]
                response = None
            if response is not None and not violations:
                latency = (time.perf_counter() - started) * 1000.0
                return response, raw, attempt, latency
            last_violations = violations
            complaint = (
                "Your previous response was invalid: "
                + "; ".join(violations)
                + ". Respond again with a single valid JSON object that follows "
                "the output format and the allowed command list."
            )
            feedback.append((raw, complaint))
        raise RetriesExhausted(config.max_retries + 1, last_violations)
    finally:
        if owns_client:
            client.close()


class LivePilot(Pilot):
    needs_image = True
    deterministic = False

    def __init__(self, config: PilotConfig, client: Optional[httpx.Client] = None) -> None:
        if config.provider not in LIVE_PROVIDERS:
            raise ValueError(f"not a live provider: {config.provider!r}")
        self.config = config
        self.name = config.provider.split("-")[0]
        self._client = client or httpx.Client()
        self._owns_client = client is None
        config.api_key()  # fail fast when the key is absent

    def decide(self, ctx: StepContext) -> PilotStep:
        bundle = build_prompt(
            query=ctx.query_text,
            topo_map=ctx.map_json,
            current_state=ctx.current_state,
            previous_state=ctx.previous_state,
            previous_movement=ctx.previous_movement,
            frontal_image_b64=ctx.frontal_b64,
            variant=self.config.prompt_variant,
        )
        response, raw, attempts, latency = decide_live(self.config, bundle, self._client)
        return PilotStep(
            response=response,
            raw_text=raw,
            prompt_digest=bundle.digest(),
            latency_ms=latency,
            attempts=attempts,
        )

    def close(self) -> None:
        if self._owns_client:
            self._client.close()
