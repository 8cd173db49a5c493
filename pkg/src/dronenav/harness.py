"""Episode runner and benchmark harness.

One episode = one query-driven closed loop over observe -> decide -> validate
-> move, ending in exactly one of five outcomes: Success, FalseSuccess,
Collision, MaxStepsExceeded, or ProtocolError. The benchmark runner sweeps
(spawn x query) rows with repetitions and renders reports and plots.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from csv import writer as csv_writer
from dataclasses import dataclass, field
from importlib import resources
from io import StringIO
from pathlib import Path
from typing import Optional

import yaml

from . import fsm
from .fsm import FsmState, TransitionDecision, initial_state
from .geometry import bearing_deg
from .percept import CameraModel, Renderer, resolve_color
from .pilot import (
    LivePilot,
    Mission,
    OraclePilot,
    Pilot,
    PilotConfig,
    PilotError,
    ReplayPilot,
    StepContext,
    TranscriptRecord,
    TranscriptWriter,
    serialize_response,
)
from .sim import DroneBody, DronePose, SimConfig, Simulator
from .simserve import RemoteSimulator, TransportError
from .world import (
    FloorPlan,
    load_default_plan,
    load_floor_plan,
    room_of,
    serialize_topological_map,
    topological_map_of,
)

OUTCOMES = ("Success", "FalseSuccess", "Collision", "MaxStepsExceeded", "ProtocolError")


@dataclass(frozen=True)
class Query:
    text: str
    target_room: str
    target_object: Optional[str] = None


@dataclass(frozen=True)
class SuccessThresholds:
    reach_distance: float = 1.2  # meters
    reach_bearing: float = 15.0  # degrees

    def to_dict(self) -> dict:
        return {"reach_distance": self.reach_distance, "reach_bearing": self.reach_bearing}


@dataclass
class EpisodeConfig:
    plan: FloorPlan
    spawn: DronePose
    query: Query
    max_steps: int = 50
    pilot_config: PilotConfig = field(default_factory=PilotConfig)
    thresholds: SuccessThresholds = field(default_factory=SuccessThresholds)
    camera: CameraModel = field(default_factory=CameraModel)
    body: DroneBody = field(default_factory=DroneBody)
    sim_config: SimConfig = field(default_factory=SimConfig)
    transcript_path: Optional[Path] = None
    save_frames: Optional[Path] = None
    episode_index: int = 0
    sim_address: Optional[str] = None  # "host:port" for a remote simulator
    plan_ref: str = "default"  # how to find the plan again (path or "default")

    def validate(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        room_ids = [r.id for r in self.plan.rooms]
        if self.query.target_room not in room_ids:
            raise ValueError(f"target room {self.query.target_room!r} is not in the plan")
        if self.query.target_object is not None:
            try:
                obj = self.plan.object_by_id(self.query.target_object)
            except KeyError:
                raise ValueError(
                    f"target object {self.query.target_object!r} is not in the plan"
                ) from None
            if obj.room != self.query.target_room:
                raise ValueError(
                    f"target object {self.query.target_object!r} lives in {obj.room!r}, "
                    f"not in {self.query.target_room!r}"
                )


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    x: float
    y: float
    z: float
    yaw: float
    command: str
    state: str  # display name of the state the decision was made in
    response_digest: str


@dataclass(frozen=True)
class EpisodeResult:
    outcome: str
    steps_used: int
    trajectory: tuple[TrajectoryPoint, ...]
    spawn: DronePose
    final_pose: DronePose
    transcript_path: Optional[str]
    rotation_flips: int
    failure: Optional[str] = None  # cause detail for ProtocolError


def _response_digest(response) -> str:
    return hashlib.sha256(serialize_response(response).encode("utf-8")).hexdigest()[:12]


def rotation_sign_flips(commands: list[str]) -> int:
    """Sign flips between consecutive rotation commands (oscillation metric)."""
    signs = [(-1 if c.startswith("B") else 1) for c in commands if c[:1] in "BC"]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def check_success(
    plan: FloorPlan,
    pose: DronePose,
    query: Query,
    final_fsm_state: FsmState,
    thresholds: SuccessThresholds = SuccessThresholds(),
) -> bool:
    """Ground-truth goal check at the moment a pre-final state chooses Final."""
    if final_fsm_state not in fsm.PRE_FINAL_STATES:
        raise ValueError(f"{final_fsm_state.display_name} is not a pre-final state")
    if room_of(plan, pose.x, pose.z) != query.target_room:
        return False
    if query.target_object is None:
        return True
    obj = plan.object_by_id(query.target_object)
    dx = obj.position[0] - pose.x
    dz = obj.position[1] - pose.z
    if (dx * dx + dz * dz) ** 0.5 > thresholds.reach_distance:
        return False
    b = bearing_deg(pose.x, pose.z, pose.yaw, obj.position[0], obj.position[1])
    return abs(b) <= thresholds.reach_bearing


def make_pilot(config: EpisodeConfig) -> Pilot:
    pc = config.pilot_config
    if pc.provider == "oracle":
        return OraclePilot(
            config.plan,
            Mission(config.query.target_room, config.query.target_object),
            reach_distance=config.thresholds.reach_distance,
            reach_bearing=config.thresholds.reach_bearing,
            camera=config.camera,
            body=config.body,
        )
    if pc.provider == "replay":
        if not pc.transcript:
            raise ValueError("replay pilot needs pilot_config.transcript")
        return ReplayPilot(pc.transcript)
    return LivePilot(pc)


def _transcript_header(config: EpisodeConfig, pilot: Pilot) -> dict:
    return {
        "plan": config.plan.name,
        "plan_ref": config.plan_ref,
        "spawn": [config.spawn.x, config.spawn.y, config.spawn.z, config.spawn.yaw],
        "query": {
            "text": config.query.text,
            "target_room": config.query.target_room,
            "target_object": config.query.target_object,
        },
        "max_steps": config.max_steps,
        "pilot": pilot.name,
        "deterministic": pilot.deterministic,
        "thresholds": config.thresholds.to_dict(),
        "rotation_convention": config.sim_config.rotation_convention,
        "episode_index": config.episode_index,
    }


def run_episode(
    config: EpisodeConfig,
    simulator=None,
    pilot: Optional[Pilot] = None,
) -> EpisodeResult:
    """Run one episode to termination. All runtime failures become outcomes;
    only configuration problems raise."""
    config.validate()
    own_pilot = pilot is None
    if pilot is None:
        pilot = make_pilot(config)

    own_sim = simulator is None
    if simulator is None:
        if config.sim_address:
            simulator = RemoteSimulator.connect(
                config.sim_address, config.spawn, frames=pilot.needs_image
            )
        else:
            renderer = None
            if pilot.needs_image or config.save_frames:
                renderer = Renderer(config.plan, config.camera)
            simulator = Simulator(
                config.plan,
                config.spawn,
                body=config.body,
                config=config.sim_config,
                renderer=renderer,
                camera=config.camera,
            )

    topo_json = serialize_topological_map(topological_map_of(config.plan))
    writer = None
    if config.transcript_path is not None:
        writer = TranscriptWriter(config.transcript_path, _transcript_header(config, pilot))

    state = initial_state(config.query)
    prev_state = "None"
    prev_move = "None"
    outcome: Optional[str] = None
    failure: Optional[str] = None
    steps_used = 0
    trajectory: list[TrajectoryPoint] = []
    commands: list[str] = []

    try:
        for step in range(config.max_steps):
            try:
                obs = simulator.observe()
                semantic = simulator.semantic()
            except TransportError as exc:
                outcome, failure = "ProtocolError", f"simulator transport: {exc}"
                break
            if config.save_frames is not None and obs.frontal is not None:
                frames_dir = Path(config.save_frames)
                frames_dir.mkdir(parents=True, exist_ok=True)
                prefix = f"step_{config.episode_index}_{step}"
                (frames_dir / f"{prefix}_front.png").write_bytes(obs.frontal.png_bytes)
                if obs.rear is not None:
                    (frames_dir / f"{prefix}_rear.png").write_bytes(obs.rear.png_bytes)

            ctx = StepContext(
                step=step,
                query_text=config.query.text,
                map_json=topo_json,
                current_state=state,
                previous_state=prev_state,
                previous_movement=prev_move,
                pose=DronePose(obs.x, obs.y, obs.z, obs.yaw),
                semantic=semantic,
                frontal_b64=(
                    obs.frontal.base64_text
                    if (pilot.needs_image and obs.frontal is not None)
                    else None
                ),
            )
            try:
                decision = pilot.decide(ctx)
            except PilotError as exc:
                outcome, failure = "ProtocolError", str(exc)
                break

            violations = fsm.validate(
                state, TransitionDecision(decision.response.movement, decision.response.state)
            )
            if writer is not None:
                writer.write(
                    TranscriptRecord(
                        step=step,
                        state=state.display_name,
                        prompt_digest=decision.prompt_digest,
                        raw=decision.raw_text,
                        response=decision.response,
                        valid=not violations,
                        violations=tuple(violations),
                        latency_ms=decision.latency_ms,
                        attempts=decision.attempts,
                    )
                )
            if violations:
                outcome, failure = "ProtocolError", "; ".join(violations)
                break

            try:
                step_result = simulator.step(decision.response.movement)
            except TransportError as exc:
                outcome, failure = "ProtocolError", f"simulator transport: {exc}"
                break
            steps_used += 1
            commands.append(decision.response.movement)
            pose = step_result.pose
            trajectory.append(
                TrajectoryPoint(
                    step=step,
                    x=pose.x,
                    y=pose.y,
                    z=pose.z,
                    yaw=pose.yaw,
                    command=decision.response.movement,
                    state=state.display_name,
                    response_digest=_response_digest(decision.response),
                )
            )

            if step_result.collided:
                outcome = "Collision"
                break
            if decision.response.state is FsmState.FINAL:
                ok = check_success(config.plan, pose, config.query, state, config.thresholds)
                outcome = "Success" if ok else "FalseSuccess"
                break

            prev_state = state.display_name
            prev_move = decision.response.movement
            state = decision.response.state

        if outcome is None:
            outcome = "MaxStepsExceeded"
    finally:
        if writer is not None:
            writer.close()
        if own_sim:
            simulator.close()
        if own_pilot:
            pilot.close()

    final_pose = (
        DronePose(trajectory[-1].x, trajectory[-1].y, trajectory[-1].z, trajectory[-1].yaw)
        if trajectory
        else config.spawn
    )
    return EpisodeResult(
        outcome=outcome,
        steps_used=steps_used,
        trajectory=tuple(trajectory),
        spawn=config.spawn,
        final_pose=final_pose,
        transcript_path=str(config.transcript_path) if config.transcript_path else None,
        rotation_flips=rotation_sign_flips(commands),
        failure=failure,
    )


# ---------------------------------------------------------------------------
# Benchmark suites


@dataclass(frozen=True)
class SuiteRow:
    spawn_id: str
    query: Query


@dataclass(frozen=True)
class Suite:
    name: str
    plan_ref: str
    repetitions: int
    spawns: dict[str, DronePose]
    rows: tuple[SuiteRow, ...]


def load_suite(path: str | Path) -> Suite:
    p = Path(path)
    data = yaml.safe_load(p.read_text(encoding="utf-8"))
    spawns = {}
    for raw in data.get("spawns", []):
        x, y, z, yaw = (float(v) for v in raw["pose"])
        spawns[str(raw["id"])] = DronePose(x, y, z, yaw)
    rows = []
    for raw in data.get("rows", []):
        rows.append(
            SuiteRow(
                spawn_id=str(raw["spawn"]),
                query=Query(
                    text=str(raw["query"]),
                    target_room=str(raw["target_room"]),
                    target_object=(
                        str(raw["target_object"]) if raw.get("target_object") else None
                    ),
                ),
            )
        )
    suite = Suite(
        name=str(data.get("name", p.stem)),
        plan_ref=str(data.get("plan", "default")),
        repetitions=int(data.get("repetitions", 5)),
        spawns=spawns,
        rows=tuple(rows),
    )
    for row in suite.rows:
        if row.spawn_id not in suite.spawns:
            raise ValueError(f"{p}: row references unknown spawn {row.spawn_id!r}")
    return suite


def default_suite_path() -> Path:
    return Path(str(resources.files("dronenav").joinpath("data/default_suite.yaml")))


def load_default_suite() -> Suite:
    return load_suite(default_suite_path())


def resolve_plan(ref: str) -> FloorPlan:
    return load_default_plan() if ref == "default" else load_floor_plan(ref)


@dataclass(frozen=True)
class ReportRow:
    starting_room: str
    query: str
    n: int
    achieved: int
    false_success: int
    collisions: int
    max_steps_exceeded: int
    protocol_errors: int

    def check_partition(self) -> None:
        total = (
            self.achieved
            + self.false_success
            + self.collisions
            + self.max_steps_exceeded
            + self.protocol_errors
        )
        if total != self.n:
            raise AssertionError(f"outcome counts {total} != episodes {self.n} in {self}")


@dataclass(frozen=True)
class BenchmarkReport:
    pilot: str
    deterministic: bool
    repetitions: int
    rows: tuple[ReportRow, ...]

    @property
    def protocol_error_count(self) -> int:
        return sum(r.protocol_errors for r in self.rows)


def run_benchmark(
    suite: Suite,
    pilot_config: PilotConfig = PilotConfig(),
    plan: Optional[FloorPlan] = None,
    out_dir: Optional[Path] = None,
    max_steps: int = 50,
    thresholds: SuccessThresholds = SuccessThresholds(),
    sim_address: Optional[str] = None,
    parallelism: int = 1,
    sim_config: SimConfig = SimConfig(),
) -> tuple[BenchmarkReport, list[EpisodeResult]]:
    """Run every (row x repetition) episode and aggregate Table-style rows."""
    if plan is None:
        plan = resolve_plan(suite.plan_ref)

    jobs = []
    episode_index = 0
    for row_idx, row in enumerate(suite.rows):
        for rep in range(suite.repetitions):
            transcript = None
            if out_dir is not None:
                transcript = Path(out_dir) / "transcripts" / f"episode_{episode_index:03d}.jsonl"
            config = EpisodeConfig(
                plan=plan,
                spawn=suite.spawns[row.spawn_id],
                query=row.query,
                max_steps=max_steps,
                pilot_config=pilot_config,
                thresholds=thresholds,
                transcript_path=transcript,
                episode_index=episode_index,
                sim_address=sim_address,
                plan_ref=suite.plan_ref,
                sim_config=sim_config,
            )
            jobs.append((row_idx, config))
            episode_index += 1

    results: list[Optional[EpisodeResult]] = [None] * len(jobs)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {pool.submit(run_episode, cfg): i for i, (_, cfg) in enumerate(jobs)}
            for fut, i in futures.items():
                results[i] = fut.result()
    else:
        for i, (_, cfg) in enumerate(jobs):
            results[i] = run_episode(cfg)

    pilot_name = {"oracle": "oracle", "replay": "replay"}.get(
        pilot_config.provider, pilot_config.provider.split("-")[0]
    )
    deterministic = pilot_config.provider in ("oracle", "replay")

    rows = []
    for row_idx, row in enumerate(suite.rows):
        row_results = [results[i] for i, (ri, _) in enumerate(jobs) if ri == row_idx]
        counts = {o: 0 for o in OUTCOMES}
        for res in row_results:
            counts[res.outcome] += 1
        spawn = suite.spawns[row.spawn_id]
        room_id = room_of(plan, spawn.x, spawn.z)
        label = plan.room_by_id(room_id).label if room_id != "unknown" else room_id
        report_row = ReportRow(
            starting_room=label,
            query=row.query.text,
            n=len(row_results),
            achieved=counts["Success"],
            false_success=counts["FalseSuccess"],
            collisions=counts["Collision"],
            max_steps_exceeded=counts["MaxStepsExceeded"],
            protocol_errors=counts["ProtocolError"],
        )
        report_row.check_partition()
        rows.append(report_row)

    report = BenchmarkReport(
        pilot=pilot_name,
        deterministic=deterministic,
        repetitions=suite.repetitions,
        rows=tuple(rows),
    )
    return report, [r for r in results if r is not None]


# ---------------------------------------------------------------------------
# Report rendering


def _dash(count: int) -> str:
    return "--" if count == 0 else str(count)


def emit_report(report: BenchmarkReport, fmt: str = "markdown-table") -> str:
    """Render a benchmark report; zero counts show as "--" in the table form."""
    if fmt == "markdown-table":
        kind = "deterministic" if report.deterministic else "sampled"
        lines = [
            "# Benchmark report",
            "",
            f"Pilot: {report.pilot} ({kind})",
            f"Repetitions per row: {report.repetitions}",
            "",
            "| Starting Room | Query | Ach. | Coll. | Steps | False | Proto |",
            "| --- | --- | --- | --- | --- | --- | --- |",
        ]
        for row in report.rows:
            lines.append(
                f"| {row.starting_room} | {row.query} | {row.achieved}/{row.n} "
                f"| {_dash(row.collisions)} | {_dash(row.max_steps_exceeded)} "
                f"| {_dash(row.false_success)} | {_dash(row.protocol_errors)} |"
            )
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = StringIO()
        w = csv_writer(buf, lineterminator="\n")
        w.writerow(
            [
                "starting_room",
                "query",
                "achieved",
                "n",
                "collisions",
                "max_steps_exceeded",
                "false_success",
                "protocol_errors",
            ]
        )
        for row in report.rows:
            w.writerow(
                [
                    row.starting_room,
                    row.query,
                    row.achieved,
                    row.n,
                    row.collisions,
                    row.max_steps_exceeded,
                    row.false_success,
                    row.protocol_errors,
                ]
            )
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# Trajectory plots (deterministic SVG)

_STATE_COLORS = {
    "Recognize Room": "#1f77b4",
    "Search Open Door": "#9467bd",
    "Orient Towards Door": "#17becf",
    "Go Through Door": "#2ca02c",
    "Search Object": "#bcbd22",
    "Reach Object": "#ff7f0e",
    "Stay on Room": "#8c564b",
    "Describe Object": "#e377c2",
}

_OUTCOME_MARKS = {
    "Success": ("circle", "#2ca02c"),
    "FalseSuccess": ("circle", "#ff7f0e"),
    "Collision": ("cross", "#d62728"),
    "MaxStepsExceeded": ("square", "#7f7f7f"),
    "ProtocolError": ("square", "#9467bd"),
}

_SCALE = 120.0  # px per meter
_MARGIN = 40.0


def emit_trajectory_plot(result: EpisodeResult, plan: FloorPlan) -> bytes:
    """Top-down SVG of one episode: rooms, doors, targets, path, outcome mark."""
    if not result.trajectory:
        raise ValueError("cannot plot an empty trajectory")

    xs = [r.footprint.x0 for r in plan.rooms] + [r.footprint.x1 for r in plan.rooms]
    zs = [r.footprint.z0 for r in plan.rooms] + [r.footprint.z1 for r in plan.rooms]
    min_x, max_x = min(xs), max(xs)
    min_z, max_z = min(zs), max(zs)

    def sx(x: float) -> float:
        return _MARGIN + (x - min_x) * _SCALE

    def sz(z: float) -> float:
        # Flip so +z points up in the figure.
        return _MARGIN + (max_z - z) * _SCALE

    width = 2 * _MARGIN + (max_x - min_x) * _SCALE
    height = 2 * _MARGIN + (max_z - min_z) * _SCALE
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
    ]

    for room in plan.rooms:
        r = room.footprint
        out.append(
            f'<rect x="{sx(r.x0):.1f}" y="{sz(r.z1):.1f}" width="{r.width * _SCALE:.1f}" '
            f'height="{r.depth * _SCALE:.1f}" fill="#f7f7f5" stroke="none"/>'
        )
        cx, cz = r.center
        out.append(
            f'<text x="{sx(cx):.1f}" y="{sz(r.z1) + 16:.1f}" font-size="12" '
            f'fill="#999999" text-anchor="middle">{room.id}</text>'
        )
    for wall in plan.walls:
        out.append(
            f'<line x1="{sx(wall.a[0]):.1f}" y1="{sz(wall.a[1]):.1f}" '
            f'x2="{sx(wall.b[0]):.1f}" y2="{sz(wall.b[1]):.1f}" '
            f'stroke="#333333" stroke-width="3"/>'
        )
    for door in plan.doors:
        (ax, az), (bx, bz) = door.opening
        out.append(
            f'<line x1="{sx(ax):.1f}" y1="{sz(az):.1f}" x2="{sx(bx):.1f}" y2="{sz(bz):.1f}" '
            f'stroke="#e0a246" stroke-width="5" stroke-dasharray="4 3"/>'
        )
    for item in plan.furniture:
        r = item.footprint
        out.append(
            f'<rect x="{sx(r.x0):.1f}" y="{sz(r.z1):.1f}" width="{r.width * _SCALE:.1f}" '
            f'height="{r.depth * _SCALE:.1f}" fill="#d9d4cc" stroke="#8a857d"/>'
        )
    for obj in plan.objects:
        ox, oz = obj.position
        r, g, b = resolve_color(obj.color)
        fill = f"#{r:02x}{g:02x}{b:02x}"
        out.append(
            f'<rect x="{sx(ox) - 6:.1f}" y="{sz(oz) - 6:.1f}" width="12" height="12" '
            f'fill="{fill}" stroke="#333333"/>'
        )
        out.append(
            f'<text x="{sx(ox):.1f}" y="{sz(oz) - 10:.1f}" font-size="11" '
            f'fill="#333333" text-anchor="middle">{obj.label}</text>'
        )

    out.append(
        f'<circle cx="{sx(result.spawn.x):.1f}" cy="{sz(result.spawn.z):.1f}" r="6" '
        f'fill="none" stroke="#1f77b4" stroke-width="2"/>'
    )

    prev_x, prev_z = result.spawn.x, result.spawn.z
    for pt in result.trajectory:
        color = _STATE_COLORS.get(pt.state, "#444444")
        out.append(
            f'<line x1="{sx(prev_x):.1f}" y1="{sz(prev_z):.1f}" '
            f'x2="{sx(pt.x):.1f}" y2="{sz(pt.z):.1f}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        hx = pt.x + 0.08 * math.cos(math.radians(pt.yaw))
        hz = pt.z + 0.08 * math.sin(math.radians(pt.yaw))
        out.append(
            f'<line x1="{sx(pt.x):.1f}" y1="{sz(pt.z):.1f}" x2="{sx(hx):.1f}" y2="{sz(hz):.1f}" '
            f'stroke="#555555" stroke-width="1"/>'
        )
        prev_x, prev_z = pt.x, pt.z

    mark, color = _OUTCOME_MARKS[result.outcome]
    fx, fz = sx(prev_x), sz(prev_z)
    if mark == "circle":
        out.append(f'<circle cx="{fx:.1f}" cy="{fz:.1f}" r="7" fill="{color}"/>')
    elif mark == "cross":
        out.append(
            f'<path d="M {fx - 6:.1f} {fz - 6:.1f} L {fx + 6:.1f} {fz + 6:.1f} '
            f'M {fx - 6:.1f} {fz + 6:.1f} L {fx + 6:.1f} {fz - 6:.1f}" '
            f'stroke="{color}" stroke-width="3" fill="none"/>'
        )
    else:
        out.append(
            f'<rect x="{fx - 6:.1f}" y="{fz - 6:.1f}" width="12" height="12" fill="{color}"/>'
        )
    out.append(
        f'<text x="{_MARGIN:.1f}" y="{height - 12:.1f}" font-size="12" fill="#333333">'
        f"{result.outcome} in {result.steps_used} steps</text>"
    )
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
