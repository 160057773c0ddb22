"""Command-line interface.

Subcommands: capture, recognize, simulate, synth, stats, latin-square,
serve. Exit codes: 0 success, 1 usage error, 2 data error (parse /
geometry / tracking), 3 protocol violation (incomplete or overrun
runs).
"""

from __future__ import annotations

import argparse
import sys

from . import server as server_mod
from .engine import CaptureSession
from .errors import (
    DegenerateHand,
    DegenerateInput,
    HandLost,
    IncompleteRun,
    InvalidArgument,
    ParseError,
    ProtocolViolation,
)
from .scene import load_scene
from .sim import SessionEngine, latin_square_order, run_replay, TECHNIQUES
from .stats import anova_oneway, describe
from .streams import (
    POSE_KINDS,
    read_frames,
    read_results,
    save_template,
    synth_stream,
    write_frames,
    write_results,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROTOCOL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this toolkit reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _vec3_arg(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="handgrasp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", parents=[], help="author a gesture template from a stream")
    p.add_argument("--in", dest="stream", required=True, help="input .frames stream")
    p.add_argument("--scene", required=True, help="scene config JSON")
    p.add_argument("--object", required=True, help="target object id")
    p.add_argument("--out", required=True, help="output .gesture file")
    p.add_argument("--name", default=None, help="template name (default <object>-<role>)")
    p.add_argument("--role", default="grab", choices=("grab", "release"))
    p.set_defaults(func=_cmd_capture)

    p = sub.add_parser("recognize", help="print the event log for a stream")
    p.add_argument("--in", dest="stream", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--technique", default="custom", choices=TECHNIQUES)
    p.set_defaults(func=_cmd_recognize)

    p = sub.add_parser("simulate", help="replay a stream through the trial protocol")
    p.add_argument("--in", dest="stream", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--technique", required=True, choices=TECHNIQUES)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--events", default=None, help="optional event log file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("synth", help="generate a synthetic pose stream")
    p.add_argument("--pose", required=True, choices=POSE_KINDS)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--rate", type=float, default=90.0, help="frames per second")
    p.add_argument("--sigma", type=float, default=0.0, help="per-coordinate noise SD, meters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", default="right", choices=("left", "right"))
    p.add_argument("--at", type=_vec3_arg, default=(0.0, 0.0, 0.0), help="wrist position x,y,z")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("stats", help="descriptive stats and ANOVA over results files")
    p.add_argument("--results", nargs="+", required=True, help="results CSV files")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("latin-square", help="print a balanced condition ordering")
    p.add_argument("--n", type=int, required=True, help="condition count")
    p.add_argument("--row", type=int, required=True, help="participant index")
    p.set_defaults(func=_cmd_latin_square)

    p = sub.add_parser("serve", help="line-protocol TCP recognition service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scene", action="append", required=True, help="scene config (repeatable)")
    p.set_defaults(func=_cmd_serve)
    return parser


def _cmd_capture(args) -> int:
    scene, store = load_scene(args.scene)
    try:
        target = scene.object_by_id(args.object)
    except KeyError:
        print(f"unknown object {args.object!r} in scene {scene.scene_id}", file=sys.stderr)
        return EXIT_DATA
    name = args.name or f"{args.object}-{args.role}"
    session = CaptureSession(
        target, template_name=name, role=args.role, hover_radius=scene.hover_radius
    )
    for frame in read_frames(args.stream):
        event = session.step(frame)
        if event.kind == "captured":
            save_template(args.out, event.template)
            print(f"captured {name} at {frame.timestamp}")
            return EXIT_OK
    print(f"stream ended before capture completed (progress {session.progress:.2f})", file=sys.stderr)
    return EXIT_PROTOCOL


def _cmd_recognize(args) -> int:
    scene, store = load_scene(args.scene)
    engine = SessionEngine(scene, store, args.technique)
    for frame in read_frames(args.stream):
        if engine.finished:
            break
        for line in engine.feed(frame):
            print(line)
    print(engine.summary().to_line())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scene, store = load_scene(args.scene)
    try:
        results, summary, lines = run_replay(scene, store, args.technique, read_frames(args.stream))
    except IncompleteRun as exc:
        write_results(args.out, exc.results)
        print(f"incomplete run: {exc}", file=sys.stderr)
        if exc.summary is not None:
            print(exc.summary.to_line(), file=sys.stderr)
        return EXIT_PROTOCOL
    write_results(args.out, results)
    if args.events:
        with open(args.events, "w") as fh:
            for line in lines:
                fh.write(line + "\n")
    print(summary.to_line())
    return EXIT_OK


def _cmd_synth(args) -> int:
    frames = synth_stream(
        kind=args.pose,
        duration=args.duration,
        rate=args.rate,
        sigma=args.sigma,
        seed=args.seed,
        side=args.side,
        at=args.at,
    )
    write_frames(args.out, frames)
    print(f"wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    rows = []
    for path in args.results:
        rows.extend(read_results(path))
    if not rows:
        print("no results", file=sys.stderr)
        return EXIT_DATA
    techniques = sorted({r.technique for r in rows})
    print("technique trials drops accuracy_mean accuracy_sd tct_mean tct_sd")
    by_technique: dict[str, list] = {t: [r for r in rows if r.technique == t] for t in techniques}
    for t in techniques:
        group = by_technique[t]
        acc = describe([r.accuracy for r in group])
        tct = describe([r.tct for r in group])
        drops = sum(1 for r in group if r.dropped)
        print(
            f"{t} {acc.n} {drops} {acc.mean:.6g} {acc.sd:.6g} {tct.mean:.6g} {tct.sd:.6g}"
        )
    if len(techniques) >= 2:
        for label, pick in (("accuracy", lambda r: r.accuracy), ("tct", lambda r: r.tct)):
            groups = [[pick(r) for r in by_technique[t]] for t in techniques]
            try:
                result = anova_oneway(groups)
            except DegenerateInput as exc:
                detail = "F=inf, zero within-group variance" if exc.infinite_f else str(exc)
                print(f"anova {label}: undefined ({detail})")
                continue
            print(
                f"anova {label}: F({result.df_between},{result.df_within})"
                f"={result.f:.6g} p={result.p:.6g}"
            )
    return EXIT_OK


def _cmd_latin_square(args) -> int:
    order = latin_square_order(args.n, args.row)
    print(" ".join(str(v) for v in order))
    return EXIT_OK


def _cmd_serve(args) -> int:
    scenes = {}
    for path in args.scene:
        scene, store = load_scene(path)
        scenes[scene.scene_id] = (scene, store)
    srv = server_mod.GraspServer(scenes, host=args.host, port=args.port)
    host, port = srv.address
    print(f"serving {len(scenes)} scene(s) on {host}:{port}")
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.stop()
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ParseError,) as exc:
        where = f" (line {exc.line_no}, field {exc.field})" if exc.line_no else ""
        print(f"data error: {exc}{where}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateHand, HandLost, DegenerateInput, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidArgument as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProtocolViolation, IncompleteRun) as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
