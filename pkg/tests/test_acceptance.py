"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Each test prints its verdict and records it for the terminal summary, so the
lines appear in ``pytest -v`` output even when output capture is on.
"""
import json
import math
import threading
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from uavstab.cli import main
from uavstab.errors import PipelineError
from uavstab.features import DetectConfig, detect_corner_array
from uavstab.flow import FlowConfig, TrackSet, track_lk
from uavstab.image_core import GrayFrame, build_pyramid, warp_plane
from uavstab.motion import Kind, SimilarityTransform, estimate_rigid, estimate_similarity, rms_residual
from uavstab.pipeline import MotionCompensator, MotionEstimator, RunSummary, StabConfig, run_offline, run_streaming
from uavstab.smoothing import SmoothConfig, Trajectory, accumulate, correction_vector, smooth_at
from uavstab.motion import DeltaParams
from uavstab.synth_eval import JitterSpec, finite_mean, generate, interframe_psnr, jitter_energy, measure_deltas, textured_image

# fixtures whose offline outputs criterion 6 replays through the streaming path
FIXTURES: dict[str, list[GrayFrame]] = {}
OFFLINE: dict[str, tuple[list[GrayFrame], RunSummary]] = {}


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _offline(name: str, frames: list[GrayFrame], cfg: StabConfig = StabConfig()):
    out: list[GrayFrame] = []
    summary = run_offline(iter(frames), cfg, out.append)
    FIXTURES[name] = frames
    OFFLINE[name] = (out, summary)
    return out, summary


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def test_criterion_1_estimator_exactness():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst, order_violations, count = 0.0, 0, 0
    for cls in (Kind.RIGID, Kind.SIMILARITY):
        for _ in range(1000):
            n = int(rng.integers(2, 201))
            p = rng.uniform([0, 0], [640, 480], (n, 2))
            s = 1.0 if cls is Kind.RIGID else math.exp(rng.uniform(-0.7, 0.7))
            truth = SimilarityTransform(*rng.uniform(-50, 50, 2), rng.uniform(-math.pi / 2, math.pi / 2), s, cls)
            tracks = TrackSet(p, truth.apply(p))
            sim, rig = estimate_similarity(tracks), estimate_rigid(tracks)
            fits = [sim, rig] if cls is Kind.RIGID else [sim]
            for est in fits:
                for a, b in zip((est.tx, est.ty, est.theta, est.s), (truth.tx, truth.ty, truth.theta, truth.s)):
                    worst = max(worst, _rel(a, b))
            if rms_residual(tracks, sim) > rms_residual(tracks, rig) + 1e-9:
                order_violations += 1
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and order_violations == 0 and elapsed < 5
    verdict(1, "estimator exactness",
            ok, f"{count} instances, max rel err {worst:.2e} (< 1e-9), "
                f"E_s > E_r on {order_violations}, {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_2_nested_model_selection():
    t0 = time.perf_counter()
    rigid = list(generate(JitterSpec(frames=200, jitter_std=3, angle_std=0.01, seed=21)))
    ramp = list(generate(JitterSpec(frames=200, jitter_std=0, drift=(0, 0, 0, math.log(1.1) / 199), seed=22)))
    _, sr = _offline("rigid stream", rigid)
    _, sz = _offline("scale ramp", ramp)
    elapsed = time.perf_counter() - t0
    epochs = math.ceil(199 / 20)
    ok = (
        sr.similarity_decisions == 0 and sr.rigid_decisions == epochs
        and sz.rigid_decisions == 0 and sz.similarity_decisions == epochs
        and elapsed < 30
    )
    verdict(2, "nested-model selection", ok,
            f"rigid stream rigid/similarity {sr.rigid_decisions}/{sr.similarity_decisions}, "
            f"scale ramp {sz.rigid_decisions}/{sz.similarity_decisions}, {epochs} epochs each, "
            f"{elapsed:.1f} s (< 30 s)")
    assert ok


def _shift_sequence(n=200, width=320, height=240, pad=80, seed=31):
    """Frames of a fixed texture translated by known per-frame shifts.

    Odd pairs use whole-pixel shifts, even pairs half-pixel ones; every tenth
    pair is a 20 px horizontal jump. Components never exceed 20 px.
    """
    canvas = textured_image(width + 2 * pad, height + 2 * pad, seed=seed)
    rng = np.random.default_rng(seed)
    pos, shifts = np.zeros(2), []
    for k in range(n - 1):
        if k % 10 == 0:
            d = np.array([20.0, 0.0])
        elif k % 2 == 0:
            d = rng.integers(-20, 21, 2).astype(float)
        else:
            d = rng.integers(-20, 20, 2) + 0.5
        if d @ pos > 0:
            d = -d
        pos = pos + d
        shifts.append(d)
    assert np.abs(np.cumsum(shifts, axis=0)).max() < pad

    frames, pos = [], np.zeros(2)
    for i in range(n):
        if i:
            pos = pos + shifts[i - 1]
        img = warp_plane(canvas, SimilarityTransform(pos[0], pos[1], kind=Kind.RIGID))
        frames.append(GrayFrame(img[pad : pad + height, pad : pad + width], i))
    return frames, shifts


def test_criterion_3_flow_recovery():
    t0 = time.perf_counter()
    frames, shifts = _shift_sequence()
    whole, half, big = [], [], {1: [], 4: []}
    pyramids = [build_pyramid(f, 4) for f in frames]
    for k, d in enumerate(shifts):
        pa, pb = pyramids[k], pyramids[k + 1]
        pts, _ = detect_corner_array(frames[k], DetectConfig())
        new, ok = track_lk(pa, pb, pts, FlowConfig(max_levels=4))
        err = np.hypot(*(new - pts - d).T)
        if np.all(d == np.round(d)):
            whole.append(np.mean(ok & (err < 0.2)))
        else:
            half.append(np.abs(np.median((new - pts)[ok], axis=0) - d).max())
        if k % 10 == 0:
            big[4].append(np.mean(ok & (err < 0.2)))
            new1, ok1 = track_lk(pa, pb, pts, FlowConfig(max_levels=1))
            big[1].append(np.mean(ok1 & (np.hypot(*(new1 - pts - d).T) < 0.2)))
    elapsed = time.perf_counter() - t0
    _offline("shifted texture", frames)
    ok = (
        min(whole) >= 0.9 and max(half) < 0.1
        and max(big[1]) < 0.9 and min(big[4]) >= 0.9 and elapsed < 60
    )
    verdict(3, "flow recovery", ok,
            f"whole-pixel pairs: worst {min(whole):.0%} of tracks within 0.2 px; "
            f"half-pixel pairs: worst median error {max(half):.4f} px; "
            f"20 px jumps: 1 level best {max(big[1]):.0%} vs 4 levels worst {min(big[4]):.0%}; "
            f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_4_smoothing_oracle():
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    worst_s = worst_c = 0.0
    bit_mismatch = 0
    for r in (10, 3):
        traj = Trajectory()
        for row in rng.normal(0, [3, 3, 0.01, 0.002], (10_000, 4)):
            accumulate(traj, DeltaParams(*row))
        traj.close()
        cfg = SmoothConfig(r)
        cum = traj.cumulative
        for i in range(len(traj)):
            s = smooth_at(traj, i, cfg)
            corrected = cum[i] + correction_vector(traj, i, cfg)
            worst_c = max(worst_c, np.abs(corrected - s).max())
            bit_mismatch += int(np.any(corrected != s))
            ref = oracles.window_mean(cum, i, r)
            worst_s = max(worst_s, np.abs(s - ref).max())
    elapsed = time.perf_counter() - t0
    ok = worst_s <= 1e-12 and worst_c <= 1e-12 and elapsed < 5
    verdict(4, "smoothing oracle", ok,
            f"max |S - windowed mean| {worst_s:.1e}, max |T + C - S| {worst_c:.1e} "
            f"({bit_mismatch} of 20000 frames differ in the last bit), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_5_end_to_end_quality():
    t0 = time.perf_counter()
    frames = list(generate(JitterSpec(frames=300, jitter_std=4, angle_std=0.01, seed=55)))
    out, _ = _offline("jittered 300", frames, StabConfig(smooth=SmoothConfig(10)))
    before = jitter_energy(measure_deltas(frames))
    after = jitter_energy(measure_deltas(out))
    psnr_in = finite_mean(interframe_psnr(frames))
    psnr_out = finite_mean(interframe_psnr(out))
    elapsed = time.perf_counter() - t0
    ratio = {k: after[k] / before[k] for k in ("dx", "dy")}
    ok = max(ratio.values()) <= 0.25 and psnr_out - psnr_in >= 3 and elapsed < 120
    verdict(5, "end-to-end quality", ok,
            f"dx/dy energy ratio {ratio['dx']:.3f}/{ratio['dy']:.3f} (<= 0.25), "
            f"PSNR {psnr_in:.2f} -> {psnr_out:.2f} dB (+{psnr_out - psnr_in:.2f}, >= +3), {elapsed:.1f} s (< 120 s)")
    assert ok


def test_criterion_6_offline_streaming_equivalence():
    if not OFFLINE:
        pytest.skip("needs the fixtures of criteria 2, 3 and 5 in the same session")
    t0 = time.perf_counter()
    mismatched, startups = [], set()
    for name, frames in FIXTURES.items():
        ref, ref_summary = OFFLINE[name]
        out: list[GrayFrame] = []
        s = run_streaming(iter(frames), StabConfig(mode="streaming", queue_capacity=24), out.append)
        same = len(out) == len(ref) and all(a.same_as(b) for a, b in zip(out, ref))
        same = same and (s.rigid_decisions, s.similarity_decisions) == (
            ref_summary.rigid_decisions, ref_summary.similarity_decisions)
        if not same:
            mismatched.append(name)
        startups.add(s.startup_frames)

    gate = []
    for r in (10, 4):
        cfg = StabConfig(smooth=SmoothConfig(r))
        me, mc = MotionEstimator(cfg), MotionCompensator(cfg)
        for n, f in enumerate(FIXTURES["jittered 300"], start=1):
            if mc.push(f, me.process(f)):
                gate.append((r, n))
                break
    elapsed = time.perf_counter() - t0
    ok = not mismatched and startups == {20} and gate == [(10, 20), (4, 8)] and elapsed < 120
    verdict(6, "offline/streaming equivalence", ok,
            f"{len(FIXTURES) - len(mismatched)}/{len(FIXTURES)} fixtures bit-identical, "
            f"first emission after {sorted(startups)} frames at r=10, gate {gate}, {elapsed:.1f} s (< 120 s)")
    assert ok


def test_criterion_7_pipeline_liveness():
    cfg = StabConfig(mode="streaming", queue_capacity=24)
    spec = JitterSpec(width=96, height=80, frames=5000, jitter_std=1.5, seed=77, min_corners=20)

    result: dict = {}

    def long_run():
        count = [0]
        result["summary"] = run_streaming(generate(spec).frames(), cfg, lambda f: count.__setitem__(0, count[0] + 1))
        result["emitted"] = count[0]

    worker = threading.Thread(target=long_run, daemon=True)
    t0 = time.perf_counter()
    worker.start()
    worker.join(timeout=300)
    long_s = time.perf_counter() - t0
    completed = not worker.is_alive() and result.get("emitted") == 5000

    stops = {}
    for where in ("source", "sink"):
        raised_at = [0.0]

        def source():
            for f in generate(JitterSpec(width=96, height=80, frames=400, seed=78, min_corners=20)).frames():
                if where == "source" and f.index == 200:
                    raised_at[0] = time.perf_counter()
                    raise OSError("injected read failure")
                yield f

        def sink(f):
            if where == "sink" and f.index == 150:
                raised_at[0] = time.perf_counter()
                raise OSError("injected write failure")

        try:
            run_streaming(source(), cfg, sink)
            stops[where] = (math.inf, "no error raised")
        except PipelineError as exc:
            stops[where] = (time.perf_counter() - raised_at[0], str(exc))
    leftover = [t.name for t in threading.enumerate() if t.name.startswith("uavstab-")]
    ok = completed and not leftover and all(dt < 1.0 and "injected" in msg for dt, msg in stops.values())
    verdict(7, "pipeline liveness", ok,
            f"5000 frames at capacity 24 {'completed' if completed else 'DID NOT complete'} in {long_s:.1f} s; "
            f"injected source error stopped in {stops['source'][0] * 1000:.0f} ms, "
            f"sink error in {stops['sink'][0] * 1000:.0f} ms (< 1 s); diagnostic: {stops['source'][1]!r}")
    assert ok


def test_criterion_8_throughput_report(tmp_path):
    rates = {}
    for w, h in ((320, 240), (640, 480)):
        frames = list(generate(JitterSpec(width=w, height=h, frames=120, jitter_std=3, seed=88)))
        s = run_offline(iter(frames), StabConfig(), lambda f: None)
        rates[(w, h)] = s
    (tmp_path / "s.json").write_text(rates[(320, 240)].to_json())
    assert "fps_me" in json.loads((tmp_path / "s.json").read_text())
    small, large = rates[(320, 240)], rates[(640, 480)]
    met = small.fps_me >= 60 and large.fps_me >= 25
    line = (f"motion estimation {small.fps_me:.0f} fps at 320x240 (soft target 60), "
            f"{large.fps_me:.0f} fps at 640x480 (soft target 25); overall {small.fps_overall:.0f}/"
            f"{large.fps_overall:.0f} fps; reported, not gated")
    # soft: the verdict reflects the targets but never fails the run
    verdict(8, "throughput (soft)", met, line)


def test_criterion_9_determinism(tmp_path):
    def artifacts(tag):
        d = tmp_path / tag
        d.mkdir()
        assert main(["synth", "--output", str(d / "in.y4m"), "--frames", "40", "--width", "160",
                     "--height", "120", "--jitter-std", "3", "--angle-std", "0.01", "--seed", "9",
                     "--truth-csv", str(d / "truth.csv")]) == 0
        for cmd in ("stabilize", "stream"):
            assert main([cmd, "--input", str(d / "in.y4m"), "--output", str(d / f"{cmd}.y4m"),
                         "--traj-csv", str(d / f"{cmd}.csv"), "--summary-json", str(d / f"{cmd}.json")]) == 0
        assert main(["stabilize", "--input", str(d / "in.y4m"), "--output", str(d / "frames"),
                     "--image-ext", "png"]) == 0
        assert main(["eval", "--original", str(d / "in.y4m"), "--stabilized", str(d / "stabilize.y4m"),
                     "--truth-csv", str(d / "truth.csv"), "--traj-csv", str(d / "stabilize.csv"),
                     "--output", str(d / "eval.json")]) == 0
        return d

    a, b = artifacts("a"), artifacts("b")
    differing, timing_only = [], []
    for p in sorted(x.relative_to(a) for x in a.rglob("*") if x.is_file()):
        if (a / p).read_bytes() == (b / p).read_bytes():
            continue
        if p.name in ("stabilize.json", "stream.json"):
            ja, jb = (json.loads((root / p).read_text()) for root in (a, b))
            for k in RunSummary.TIMING_FIELDS:
                ja.pop(k), jb.pop(k)
            if ja == jb:
                timing_only.append(str(p))
                continue
        differing.append(str(p))
    files = sum(1 for x in a.rglob("*") if x.is_file())
    ok = not differing
    verdict(9, "determinism", ok,
            f"{files - len(differing) - len(timing_only)}/{files} artifacts byte-identical; "
            f"{len(timing_only)} run summaries identical apart from wall-clock timing fields; "
            f"differing: {differing or 'none'}")
    assert ok
