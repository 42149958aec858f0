"""Command-line entry point: ``uavstab {stabilize,stream,synth,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import StabilizerError
from .features import DetectConfig
from .flow import FlowConfig
from .media_io import (
    StreamSpec,
    export_trajectory,
    open_writer,
    read_deltas_csv,
    read_image,
    read_stream,
    write_json,
    write_stream,
    write_truth_csv,
)
from .pipeline import StabConfig, run
from .smoothing import SmoothConfig
from .synth_eval import JitterSpec, generate, score

log = logging.getLogger("uavstab")


def _drift(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad drift {text!r}") from None
    if len(vals) not in (2, 4):
        raise argparse.ArgumentTypeError("drift takes dx,dy or dx,dy,da,dls")
    return vals


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="input .y4m file or image directory")
    p.add_argument("--output", required=True, help="output .y4m file or image directory")
    p.add_argument("--radius", type=int, default=10, help="smoothing radius in frames")
    p.add_argument("--dwell", type=int, default=20, help="frames between model decisions")
    p.add_argument("--margin", type=float, default=0.05, help="rigid preference margin")
    p.add_argument("--max-corners", type=int, default=50)
    p.add_argument("--roi-margin", type=float, default=0.1)
    p.add_argument("--crop", type=float, default=0.04, help="crop ratio per side")
    p.add_argument("--redetect", type=int, default=5, help="re-detect corners every N frames")
    p.add_argument("--model", choices=("hybrid", "rigid", "similarity"), default="hybrid")
    p.add_argument("--queue-capacity", type=int, default=None)
    p.add_argument("--image-ext", choices=("png", "pgm"), default=None, help="format for image-directory output")
    p.add_argument("--traj-csv", help="write the per-frame trajectory here")
    p.add_argument("--summary-json", help="write the run summary here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavstab", description="Real-time video stabilization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("stabilize", help="offline stabilization"))
    stream = sub.add_parser("stream", help="three-stage concurrent stabilization")
    _add_run_flags(stream)
    stream.add_argument("--realtime-throttle", type=float, metavar="FPS", help="pace the source at FPS")

    synth = sub.add_parser("synth", help="generate a jittered sequence with ground truth")
    synth.add_argument("--output", required=True)
    synth.add_argument("--base-image", help="textured base image (generated if omitted)")
    synth.add_argument("--frames", type=int, default=120)
    synth.add_argument("--width", type=int, default=320)
    synth.add_argument("--height", type=int, default=240)
    synth.add_argument("--jitter-std", type=float, default=4.0)
    synth.add_argument("--angle-std", type=float, default=0.0)
    synth.add_argument("--scale-jitter", type=float, default=0.0)
    synth.add_argument("--drift", type=_drift, default=(0.0, 0.0), help="dx,dy[,da,dls] per frame")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--fps", type=float, default=30.0)
    synth.add_argument("--image-ext", choices=("png", "pgm"), default=None)
    synth.add_argument("--truth-csv")

    ev = sub.add_parser("eval", help="score a stabilized stream against its input")
    ev.add_argument("--original", required=True)
    ev.add_argument("--stabilized", required=True)
    ev.add_argument("--truth-csv", help="generator truth CSV")
    ev.add_argument("--traj-csv", help="trajectory CSV of the run being scored")
    ev.add_argument("--crop", type=float, default=0.04)
    ev.add_argument("--output", help="metric JSON path (stdout if omitted)")
    return parser


def _config(args) -> StabConfig:
    radius = args.radius
    cap = args.queue_capacity if args.queue_capacity is not None else max(64, 2 * radius + 4)
    return StabConfig(
        detect=DetectConfig(max_corners=args.max_corners, roi_margin=args.roi_margin),
        flow=FlowConfig(redetect_interval=args.redetect),
        smooth=SmoothConfig(radius),
        dwell=args.dwell,
        margin=args.margin,
        model=args.model,
        crop_ratio=args.crop,
        mode="streaming" if args.command == "stream" else "offline",
        queue_capacity=cap,
    )


def _stabilize(args) -> int:
    cfg = _config(args)
    src = StreamSpec.from_path(args.input)
    frames = read_stream(src)
    ext = args.image_ext or (src.image_ext if src.kind == "images" else "png")
    dst = StreamSpec.from_path(args.output, src.fps, ext)
    kw = {"realtime_fps": args.realtime_throttle} if args.command == "stream" else {}
    with open_writer(dst) as writer:
        summary = run(frames, cfg, writer.write, **kw)
    if args.traj_csv:
        export_trajectory(summary.trajectory, args.traj_csv)
    if args.summary_json:
        write_json(summary.to_json(), args.summary_json)
    log.info(
        "%d frames, %.1f fps overall, rigid/similarity %d/%d",
        summary.frames, summary.fps_overall, summary.rigid_decisions, summary.similarity_decisions,
    )
    return 0


def _synth(args) -> int:
    base = None
    if args.base_image:
        base = read_image(args.base_image, keep_color=False).pixels
    spec = JitterSpec(
        width=args.width,
        height=args.height,
        frames=args.frames,
        jitter_std=args.jitter_std,
        angle_std=args.angle_std,
        scale_jitter_std=args.scale_jitter,
        drift=args.drift,
        seed=args.seed,
        base=base,
    )
    seq = generate(spec)
    dst = StreamSpec.from_path(args.output, args.fps, args.image_ext)
    write_stream(seq.frames(), dst)
    if args.truth_csv:
        write_truth_csv(seq.truth, args.truth_csv)
    return 0


def _eval(args) -> int:
    original = list(read_stream(StreamSpec.from_path(args.original)))
    stabilized = list(read_stream(StreamSpec.from_path(args.stabilized)))
    truth = read_deltas_csv(args.truth_csv) if args.truth_csv else None
    estimated = read_deltas_csv(args.traj_csv) if args.traj_csv else None
    report = score(original, stabilized, truth, estimated, crop_ratio=args.crop)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.output:
        write_json(text, args.output)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"stabilize": _stabilize, "stream": _stabilize, "synth": _synth, "eval": _eval}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (StabilizerError, OSError) as exc:
        cause = exc.__cause__
        detail = f" ({type(cause).__name__}: {cause})" if cause is not None and str(cause) not in str(exc) else ""
        print(f"uavstab {args.command}: error: {exc}{detail}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
