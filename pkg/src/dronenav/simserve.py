"""Newline-delimited JSON wire protocol exposing the simulator over TCP.

One connection = one session = one simulator. Messages strictly alternate:
after `hello` the server sends an `obs`; each `act` yields the next `obs`;
a collision or `bye` ends the session with a `result`. See docs/protocol.md
for the byte-level contract.
"""

from __future__ import annotations

import base64
import io
import json
import socket
import socketserver
import threading
import uuid
from typing import Optional

import numpy as np
from PIL import Image

from .percept import CameraModel, RenderedImage, Renderer, SemanticObservation, semantic_observe
from .sim import (
    COMMANDS,
    Contact,
    DroneBody,
    DronePose,
    Observation,
    SimConfig,
    Simulator,
    StartInCollisionError,
    StepResult,
)
from .world import FloorPlan, room_of

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 8 * 1024 * 1024


class TransportError(ConnectionError):
    """The wire session failed (peer vanished, desync, malformed traffic)."""


def _pose_dict(pose: DronePose) -> dict:
    return {"x": pose.x, "y": pose.y, "z": pose.z, "yaw": pose.yaw}


def _obs_payload(
    sim: Simulator,
    plan: FloorPlan,
    step_result: Optional[StepResult],
    frames: bool,
    step: int,
) -> dict:
    pose = sim.pose
    payload = {
        "step": step,
        "pose": _pose_dict(pose),
        "collided": sim.last_collided,
        "traveled": step_result.traveled if step_result else 0.0,
        "contact": (
            {
                "obstacle": step_result.contact.obstacle_id,
                "point": [step_result.contact.point[0], step_result.contact.point[1]],
            }
            if step_result and step_result.contact
            else None
        ),
        "room": room_of(plan, pose.x, pose.z),
        "semantic": sim.semantic().to_dict(),
    }
    if frames:
        obs = sim.observe()
        payload["frames"] = {
            "front": obs.frontal.base64_text if obs.frontal else None,
            "rear": obs.rear.base64_text if obs.rear else None,
        }
    return payload


class _SessionHandler(socketserver.StreamRequestHandler):
    server: "SimServer"

    def _send(self, kind: str, session: str, **payload) -> None:
        msg = {"kind": kind, "session": session}
        msg.update(payload)
        line = json.dumps(msg, sort_keys=True) + "\n"
        self.wfile.write(line.encode("utf-8"))
        self.wfile.flush()

    def handle(self) -> None:
        session_id = ""
        sim: Optional[Simulator] = None
        frames = False
        step = 0
        while True:
            try:
                line = self.rfile.readline(MAX_LINE_BYTES + 1)
            except (OSError, ValueError):
                return
            if not line:
                return
            if len(line) > MAX_LINE_BYTES:
                self._send("error", session_id, message="line exceeds 8 MiB limit")
                return
            try:
                msg = json.loads(line.decode("utf-8"))
                kind = msg["kind"]
            except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError):
                self._send("error", session_id, message="malformed message")
                return

            if kind == "hello":
                if sim is not None:
                    self._send("error", session_id, message="session already started")
                    return
                spawn_raw = msg.get("spawn") or {}
                try:
                    spawn = DronePose(
                        float(spawn_raw["x"]),
                        float(spawn_raw["y"]),
                        float(spawn_raw["z"]),
                        float(spawn_raw["yaw"]),
                    )
                except (KeyError, TypeError, ValueError):
                    self._send("error", session_id, message="hello needs spawn {x,y,z,yaw}")
                    return
                frames = bool(msg.get("frames", False))
                session_id = uuid.uuid4().hex[:12]
                try:
                    sim = Simulator(
                        self.server.plan,
                        spawn,
                        body=self.server.body,
                        config=self.server.sim_config,
                        renderer=self.server.renderer if frames else None,
                        camera=self.server.camera,
                    )
                except (StartInCollisionError, ValueError) as exc:
                    self._send("error", session_id, message=f"bad spawn: {exc}")
                    return
                self._send(
                    "obs",
                    session_id,
                    v=PROTOCOL_VERSION,
                    **_obs_payload(sim, self.server.plan, None, frames, step),
                )
                continue

            if sim is None:
                self._send("error", session_id, message="no session; send hello first")
                return

            if kind == "act":
                code = str(msg.get("cmd", "")).strip().upper()
                if code not in COMMANDS:
                    # Unknown command codes are recoverable: report and keep going.
                    self._send("error", session_id, message=f"unknown command code {code!r}")
                    continue
                result = sim.step(code)
                step += 1
                self._send(
                    "obs",
                    session_id,
                    **_obs_payload(sim, self.server.plan, result, frames, step),
                )
                if result.collided:
                    self._send("result", session_id, reason="collision", steps=step)
                    return
                continue

            if kind == "bye":
                self._send("result", session_id, reason="bye", steps=step)
                return

            self._send("error", session_id, message=f"unexpected kind {kind!r}")
            return


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class SimServer:
    """TCP server hosting one isolated Simulator per connection."""

    def __init__(
        self,
        plan: FloorPlan,
        host: str = "127.0.0.1",
        port: int = 0,
        body: DroneBody = DroneBody(),
        sim_config: SimConfig = SimConfig(),
        camera: CameraModel = CameraModel(),
    ) -> None:
        self.plan = plan
        self.body = body
        self.sim_config = sim_config
        self.camera = camera
        self.renderer = Renderer(plan, camera)
        self._server = _ThreadingServer((host, port), _SessionHandler)
        self._server.plan = plan  # type: ignore[attr-defined]
        self._server.body = body  # type: ignore[attr-defined]
        self._server.sim_config = sim_config  # type: ignore[attr-defined]
        self._server.camera = camera  # type: ignore[attr-defined]
        self._server.renderer = self.renderer  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "SimServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def __enter__(self) -> "SimServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(plan: FloorPlan, bind: str = "127.0.0.1:7007", **kwargs) -> SimServer:
    """Start a server on host:port and return the running handle."""
    host, _, port = bind.partition(":")
    server = SimServer(plan, host=host or "127.0.0.1", port=int(port or 0), **kwargs)
    return server.start()


class RemoteSimulator:
    """Drop-in simulator session backed by a wire connection.

    Implements the same observe/step/semantic surface as the local Simulator,
    so the episode runner cannot tell the difference.
    """

    def __init__(self, sock: socket.socket, frames: bool) -> None:
        self._sock = sock
        self._rfile = sock.makefile("rb")
        self._frames = frames
        self.session = ""
        self.pose = DronePose(0, 0, 0, 0)
        self.last_collided = False
        self._semantic: Optional[SemanticObservation] = None
        self._last_frames: dict = {}
        self._closed = False

    # -- wiring ---------------------------------------------------------------

    @classmethod
    def connect(cls, address: str, spawn: DronePose, frames: bool = False) -> "RemoteSimulator":
        host, _, port = address.partition(":")
        try:
            sock = socket.create_connection((host, int(port)), timeout=30)
        except OSError as exc:
            raise TransportError(f"cannot connect to {address}: {exc}") from exc
        remote = cls(sock, frames)
        remote._send(
            {
                "kind": "hello",
                "session": "",
                "v": PROTOCOL_VERSION,
                "spawn": _pose_dict(spawn),
                "frames": frames,
            }
        )
        remote._read_obs()
        return remote

    def _send(self, msg: dict) -> None:
        if self._closed:
            raise TransportError("session is closed")
        try:
            self._sock.sendall((json.dumps(msg, sort_keys=True) + "\n").encode("utf-8"))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read(self) -> dict:
        try:
            line = self._rfile.readline(MAX_LINE_BYTES + 1)
        except OSError as exc:
            raise TransportError(f"read failed: {exc}") from exc
        if not line:
            raise TransportError("server closed the connection")
        try:
            return json.loads(line.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise TransportError(f"bad message from server: {exc}") from exc

    def _read_obs(self) -> dict:
        msg = self._read()
        if msg.get("kind") == "error":
            raise TransportError(f"server error: {msg.get('message')}")
        if msg.get("kind") != "obs":
            raise TransportError(f"protocol desync: expected obs, got {msg.get('kind')!r}")
        self.session = msg.get("session", "")
        pose = msg["pose"]
        self.pose = DronePose(pose["x"], pose["y"], pose["z"], pose["yaw"])
        self.last_collided = bool(msg["collided"])
        self._semantic = SemanticObservation.from_dict(msg["semantic"])
        self._last_frames = msg.get("frames") or {}
        return msg

    # -- simulator surface -------------------------------------------------------

    def step(self, cmd: str) -> StepResult:
        self._send({"kind": "act", "session": self.session, "cmd": cmd})
        msg = self._read_obs()
        contact = None
        if msg.get("contact"):
            contact = Contact(
                obstacle_id=msg["contact"]["obstacle"],
                point=tuple(msg["contact"]["point"]),
            )
        result = StepResult(
            pose=self.pose,
            collided=self.last_collided,
            contact=contact,
            traveled=float(msg.get("traveled", 0.0)),
        )
        if result.collided:
            # The server follows a collision obs with a result line and closes.
            try:
                self._read()
            except TransportError:
                pass
            self._closed = True
        return result

    def observe(self) -> Observation:
        frontal = rear = None
        if self._frames:
            frontal = self._decode_frame(self._last_frames.get("front"))
            rear = self._decode_frame(self._last_frames.get("rear"))
        return Observation(
            frontal=frontal,
            rear=rear,
            x=self.pose.x,
            y=self.pose.y,
            z=self.pose.z,
            yaw=self.pose.yaw,
            collided=self.last_collided,
        )

    @staticmethod
    def _decode_frame(b64: Optional[str]) -> Optional[RenderedImage]:
        if not b64:
            return None
        png = base64.b64decode(b64)
        pixels = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
        return RenderedImage(
            width=pixels.shape[1],
            height=pixels.shape[0],
            pixels=pixels,
            png_bytes=png,
            base64_text=b64,
        )

    def semantic(self) -> SemanticObservation:
        if self._semantic is None:
            raise TransportError("no observation received yet")
        return self._semantic

    def close(self) -> None:
        if self._closed:
            return
        try:
            self._send({"kind": "bye", "session": self.session})
            self._read()
        except TransportError:
            pass
        finally:
            self._closed = True
            try:
                self._sock.close()
            except OSError:
                pass
