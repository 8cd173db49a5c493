"""Command-line interface.

Subcommands: run (one episode), bench (a suite), replay (re-run a transcript),
render (one frame), simserve (wire-protocol server), fsm (state-table tools).
Exit code is 0 iff no episode ended in a ProtocolError.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fsm as fsm_mod
from .harness import (
    EpisodeConfig,
    EpisodeResult,
    Query,
    SuccessThresholds,
    emit_report,
    emit_trajectory_plot,
    load_default_suite,
    load_suite,
    resolve_plan,
    run_benchmark,
    run_episode,
)
from .percept import CameraModel, Renderer
from .pilot import PilotConfig, read_transcript
from .sim import DronePose, SimConfig
from .simserve import serve

_PROVIDER_ALIASES = {
    "oracle": "oracle",
    "replay": "replay",
    "openai": "openai-compatible",
    "openai-compatible": "openai-compatible",
    "gemini": "gemini-compatible",
    "gemini-compatible": "gemini-compatible",
}


def _parse_pose(text: str) -> DronePose:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("pose must be 'x,y,z,yaw'")
    try:
        x, y, z, yaw = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad pose {text!r}: {exc}") from None
    return DronePose(x, y, z, yaw)


def _resolve_spawn(text: str, suite) -> DronePose:
    if text in suite.spawns:
        return suite.spawns[text]
    return _parse_pose(text)


def _pilot_config(args) -> PilotConfig:
    return PilotConfig(
        provider=_PROVIDER_ALIASES[args.pilot],
        model=getattr(args, "model", "gpt-4.1"),
        endpoint=getattr(args, "endpoint", "") or "",
        max_retries=getattr(args, "max_retries", 2),
        temperature=getattr(args, "temperature", 0.0),
        prompt_variant=getattr(args, "prompt_variant", "default"),
        transcript=getattr(args, "transcript", None),
    )


def _episode_summary(result: EpisodeResult) -> str:
    line = f"{result.outcome} in {result.steps_used} steps"
    if result.failure:
        line += f" ({result.failure})"
    return line


def cmd_run(args) -> int:
    plan = resolve_plan(args.plan)
    suite = load_default_suite() if args.plan == "default" else None
    spawn = (
        _resolve_spawn(args.spawn, suite)
        if suite is not None
        else _parse_pose(args.spawn)
    )
    query = Query(
        text=args.query,
        target_room=args.target_room,
        target_object=args.target_object,
    )
    config = EpisodeConfig(
        plan=plan,
        spawn=spawn,
        query=query,
        max_steps=args.max_steps,
        pilot_config=_pilot_config(args),
        thresholds=SuccessThresholds(args.reach_distance, args.reach_bearing),
        sim_config=SimConfig(rotation_convention=args.rotation_convention),
        transcript_path=Path(args.out_transcript) if args.out_transcript else None,
        save_frames=Path(args.save_frames) if args.save_frames else None,
        sim_address=args.sim.removeprefix("remote:") if args.sim else None,
        plan_ref=args.plan,
    )
    result = run_episode(config)
    print(_episode_summary(result))
    if args.plot:
        Path(args.plot).write_bytes(emit_trajectory_plot(result, plan))
        print(f"trajectory plot written to {args.plot}")
    return 1 if result.outcome == "ProtocolError" else 0


def cmd_bench(args) -> int:
    suite = load_default_suite() if args.suite == "default" else load_suite(args.suite)
    if args.reps is not None:
        suite = type(suite)(
            name=suite.name,
            plan_ref=suite.plan_ref,
            repetitions=args.reps,
            spawns=suite.spawns,
            rows=suite.rows,
        )
    report, results = run_benchmark(
        suite,
        pilot_config=_pilot_config(args),
        out_dir=Path(args.out_dir) if args.out_dir else None,
        max_steps=args.max_steps,
        thresholds=SuccessThresholds(args.reach_distance, args.reach_bearing),
        sim_address=args.sim.removeprefix("remote:") if args.sim else None,
        parallelism=args.parallelism,
    )
    text = emit_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        print(text, end="")
    return 1 if report.protocol_error_count else 0


def cmd_replay(args) -> int:
    header, _records = read_transcript(args.transcript)
    plan_ref = args.plan or header.get("plan_ref", "default")
    plan = resolve_plan(plan_ref)
    sx, sy, sz, syaw = header["spawn"]
    q = header["query"]
    config = EpisodeConfig(
        plan=plan,
        spawn=DronePose(sx, sy, sz, syaw),
        query=Query(q["text"], q["target_room"], q.get("target_object")),
        max_steps=int(header.get("max_steps", 50)),
        pilot_config=PilotConfig(provider="replay", transcript=args.transcript),
        thresholds=SuccessThresholds(**header.get("thresholds", {})),
        sim_config=SimConfig(
            rotation_convention=header.get("rotation_convention", "b-right")
        ),
        plan_ref=plan_ref,
    )
    result = run_episode(config)
    print(_episode_summary(result))
    if args.plot:
        Path(args.plot).write_bytes(emit_trajectory_plot(result, plan))
    return 1 if result.outcome == "ProtocolError" else 0


def cmd_render(args) -> int:
    plan = resolve_plan(args.plan)
    pose = _parse_pose(args.pose)
    renderer = Renderer(plan, CameraModel())
    front = renderer.frontal(pose)
    out = Path(args.out)
    out.write_bytes(front.png_bytes)
    print(f"frontal view written to {out}")
    if args.rear:
        rear_path = out.with_name(out.stem + "_rear" + out.suffix)
        rear_path.write_bytes(renderer.rear(pose).png_bytes)
        print(f"rear view written to {rear_path}")
    return 0


def cmd_simserve(args) -> int:
    plan = resolve_plan(args.plan)
    server = serve(plan, bind=args.bind)
    host, port = server.address
    print(f"simulator serving {plan.name} on {host}:{port}")
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_fsm(args) -> int:
    if args.fsm_command == "dump":
        print(fsm_mod.dump_table(), end="")
        return 0
    raise SystemExit(f"unknown fsm subcommand {args.fsm_command!r}")


def _add_pilot_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pilot", choices=sorted(_PROVIDER_ALIASES), default="oracle")
    p.add_argument("--model", default="gpt-4.1")
    p.add_argument("--endpoint", default="")
    p.add_argument("--max-retries", type=int, default=2, dest="max_retries")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--prompt-variant", choices=["default", "close-approach"],
                   default="default", dest="prompt_variant")
    p.add_argument("--transcript", default=None, help="transcript path for --pilot replay")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--plan", default="default", help="floor-plan file or 'default'")
    p.add_argument("--max-steps", type=int, default=50, dest="max_steps")
    p.add_argument("--reach-distance", type=float, default=1.2, dest="reach_distance")
    p.add_argument("--reach-bearing", type=float, default=15.0, dest="reach_bearing")
    p.add_argument("--rotation-convention", choices=["b-right", "b-left"],
                   default="b-right", dest="rotation_convention")
    p.add_argument("--sim", default=None, help="remote simulator, e.g. remote:127.0.0.1:7007")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dronenav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode")
    _add_common_args(p_run)
    _add_pilot_args(p_run)
    p_run.add_argument("--spawn", required=True, help="spawn id from the default suite or 'x,y,z,yaw'")
    p_run.add_argument("--query", required=True)
    p_run.add_argument("--target-room", required=True, dest="target_room")
    p_run.add_argument("--target-object", default=None, dest="target_object")
    p_run.add_argument("--out-transcript", default=None, dest="out_transcript")
    p_run.add_argument("--save-frames", default=None, dest="save_frames",
                       help="directory for per-step PNG frames")
    p_run.add_argument("--plot", default=None, help="write a trajectory SVG here")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="run a benchmark suite")
    _add_common_args(p_bench)
    _add_pilot_args(p_bench)
    p_bench.add_argument("--suite", default="default", help="suite file or 'default'")
    p_bench.add_argument("--reps", type=int, default=None, help="override suite repetitions")
    p_bench.add_argument("--out", default=None, help="write the report here")
    p_bench.add_argument("--out-dir", default=None, dest="out_dir",
                         help="directory for per-episode transcripts")
    p_bench.add_argument("--format", choices=["markdown-table", "csv"], default="markdown-table")
    p_bench.add_argument("--parallelism", type=int, default=1)
    p_bench.set_defaults(func=cmd_bench)

    p_replay = sub.add_parser("replay", help="re-run a recorded transcript")
    p_replay.add_argument("--transcript", required=True)
    p_replay.add_argument("--plan", default=None, help="override the transcript's plan")
    p_replay.add_argument("--plot", default=None)
    p_replay.set_defaults(func=cmd_replay)

    p_render = sub.add_parser("render", help="render one camera frame")
    p_render.add_argument("--plan", default="default")
    p_render.add_argument("--pose", required=True, help="'x,y,z,yaw'")
    p_render.add_argument("--out", default="frame.png")
    p_render.add_argument("--rear", action="store_true", help="also write the rear view")
    p_render.set_defaults(func=cmd_render)

    p_serve = sub.add_parser("simserve", help="serve the simulator over TCP")
    p_serve.add_argument("--plan", default="default")
    p_serve.add_argument("--bind", default="127.0.0.1:7007")
    p_serve.set_defaults(func=cmd_simserve)

    p_fsm = sub.add_parser("fsm", help="state-table tools")
    p_fsm.add_argument("fsm_command", choices=["dump"])
    p_fsm.set_defaults(func=cmd_fsm)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
