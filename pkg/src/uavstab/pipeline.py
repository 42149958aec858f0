"""Offline and three-stage streaming stabilization.

Both modes drive the same three stage objects, so their outputs agree bit for
bit; streaming only changes where each stage runs.

    ME  (motion estimation)    Tracker -> ModelSelector -> DeltaParams
    MC  (motion compensation)  Trajectory -> smoothed pose -> correction
    IC  (image composition)    warp -> crop/resize -> sink
"""
from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from . import _kernels
from .errors import ConfigError, DegenerateInputError, InvalidInputError, PipelineError, SequenceError
from .features import DetectConfig
from .flow import FlowConfig, Tracker
from .image_core import GrayFrame, crop_resize, warp_similarity
from .motion import DeltaParams, Kind, ModelSelector, SimilarityTransform, extract_delta
from .smoothing import SmoothConfig, Trajectory, accumulate, correction, is_ready

log = logging.getLogger(__name__)

Sink = Callable[[GrayFrame], None]


@dataclass(frozen=True)
class StabConfig:
    detect: DetectConfig = field(default_factory=DetectConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    smooth: SmoothConfig = field(default_factory=SmoothConfig)
    dwell: int = 20
    margin: float = 0.05
    model: str = "hybrid"
    crop_ratio: float = 0.04
    mode: str = "offline"
    queue_capacity: int = 64

    def __post_init__(self):
        if self.mode not in ("offline", "streaming"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.model not in ("hybrid", "rigid", "similarity"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.dwell < 1:
            raise ConfigError("dwell must be >= 1")
        if not 0.0 <= self.crop_ratio < 0.25:
            raise ConfigError("crop_ratio must be in [0, 0.25)")
        if self.queue_capacity < 2 * self.smooth.radius + 4:
            raise ConfigError(
                f"queue_capacity must be >= 2r + 4 = {2 * self.smooth.radius + 4}"
            )

    @property
    def startup_frames(self) -> int:
        return 2 * self.smooth.radius


@dataclass
class StageStats:
    frames: int = 0
    busy_s: float = 0.0

    @property
    def fps(self) -> float:
        return self.frames / self.busy_s if self.busy_s > 0 else 0.0


class MotionEstimator:
    def __init__(self, cfg: StabConfig):
        self.tracker = Tracker(cfg.flow, cfg.detect)
        self.selector = ModelSelector(cfg.dwell, cfg.margin, cfg.model)
        self.skipped = 0
        self.count = 0
        self.stats = StageStats()

    def process(self, frame: GrayFrame) -> DeltaParams:
        t0 = time.perf_counter()
        first = self.count == 0
        # the tracker works on stream position so the trajectory stays index-aligned
        tracks = self.tracker.advance(GrayFrame(frame.pixels, self.count))
        self.count += 1
        if first:
            delta = DeltaParams(kind=self.selector.current_kind)
        elif tracks is None:
            delta = self._skip()
        else:
            try:
                delta = extract_delta(self.selector.select(tracks))
            except DegenerateInputError:
                delta = self._skip()
        self.stats.frames += 1
        self.stats.busy_s += time.perf_counter() - t0
        return delta

    def _skip(self) -> DeltaParams:
        self.selector.skip()
        self.skipped += 1
        return DeltaParams.skip(self.selector.current_kind)


class MotionCompensator:
    """Accumulates deltas and releases ``(frame, correction)`` once a window is complete.

    Nothing is released before ``startup`` frames have arrived (or the
    stream ends); afterwards frame ``i`` is released as soon as frame
    ``i + radius`` is in.
    """

    def __init__(self, cfg: StabConfig):
        self.cfg = cfg.smooth
        self.startup = cfg.startup_frames
        self.trajectory = Trajectory()
        self.pending: list[GrayFrame] = []
        self.next_out = 0
        self.frames_in_at_first_emit: int | None = None
        self.stats = StageStats()

    def _drain(self) -> list[tuple[GrayFrame, SimilarityTransform]]:
        out = []
        traj = self.trajectory
        if not traj.closed and len(traj) < self.startup:
            return out
        while self.pending and is_ready(traj, self.next_out, self.cfg):
            out.append((self.pending.pop(0), correction(traj, self.next_out, self.cfg)))
            self.next_out += 1
        if out and self.frames_in_at_first_emit is None:
            self.frames_in_at_first_emit = len(traj)
        return out

    def push(self, frame: GrayFrame, delta: DeltaParams) -> list[tuple[GrayFrame, SimilarityTransform]]:
        t0 = time.perf_counter()
        accumulate(self.trajectory, delta)
        self.pending.append(frame)
        out = self._drain()
        self.stats.frames += len(out)
        self.stats.busy_s += time.perf_counter() - t0
        return out

    def finish(self) -> list[tuple[GrayFrame, SimilarityTransform]]:
        t0 = time.perf_counter()
        self.trajectory.close()
        out = self._drain()
        self.stats.frames += len(out)
        self.stats.busy_s += time.perf_counter() - t0
        return out


class ImageComposer:
    def __init__(self, cfg: StabConfig):
        self.crop_ratio = cfg.crop_ratio
        self.stats = StageStats()

    def compose(self, frame: GrayFrame, t: SimilarityTransform) -> GrayFrame:
        t0 = time.perf_counter()
        out = crop_resize(warp_similarity(frame, t), self.crop_ratio)
        self.stats.frames += 1
        self.stats.busy_s += time.perf_counter() - t0
        return out


@dataclass
class RunTelemetry:
    mode: str
    frames: int
    wall_s: float
    me: StageStats
    mc: StageStats
    ic: StageStats
    usage: dict
    skipped_frames: int
    latency_frames: int
    startup_frames: int | None
    estimations: int


@dataclass
class RunSummary:
    frames: int
    fps_overall: float
    fps_me: float
    fps_mc: float
    fps_ic: float
    rigid_decisions: int
    similarity_decisions: int
    skipped_frames: int
    latency_frames: int
    startup_frames: int | None = None
    mode: str = "offline"
    wall_s: float = 0.0
    busy_s: dict = field(default_factory=dict)
    estimations: int = 0
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    TIMING_FIELDS = ("fps_overall", "fps_me", "fps_mc", "fps_ic", "wall_s", "busy_s")

    @property
    def decision_epochs(self) -> int:
        return self.rigid_decisions + self.similarity_decisions

    def to_dict(self) -> dict:
        d = {k: v for k, v in vars(self).items() if k != "trajectory"}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def summarize(t: RunTelemetry) -> RunSummary:
    return RunSummary(
        frames=t.frames,
        fps_overall=t.frames / t.wall_s if t.wall_s > 0 else 0.0,
        fps_me=t.me.fps,
        fps_mc=t.mc.fps,
        fps_ic=t.ic.fps,
        rigid_decisions=int(t.usage.get(Kind.RIGID, 0)),
        similarity_decisions=int(t.usage.get(Kind.SIMILARITY, 0)),
        skipped_frames=t.skipped_frames,
        latency_frames=t.latency_frames,
        startup_frames=t.startup_frames,
        mode=t.mode,
        wall_s=t.wall_s,
        busy_s={"me": t.me.busy_s, "mc": t.mc.busy_s, "ic": t.ic.busy_s},
        estimations=t.estimations,
    )


def _telemetry(mode, cfg, wall, me, mc, ic) -> RunTelemetry:
    return RunTelemetry(
        mode=mode,
        frames=me.count,
        wall_s=wall,
        me=me.stats,
        mc=mc.stats,
        ic=ic.stats,
        usage=dict(me.selector.usage_counts),
        skipped_frames=me.skipped,
        latency_frames=cfg.smooth.radius,
        startup_frames=mc.frames_in_at_first_emit,
        estimations=sum(me.selector.fits.values()),
    )


def _check_order(last: int | None, frame: GrayFrame) -> int:
    if last is not None and frame.index <= last:
        raise SequenceError(f"source yielded frame {frame.index} after {last}")
    return frame.index


def run_offline(source: Iterable[GrayFrame], cfg: StabConfig, sink: Sink) -> RunSummary:
    """Single-threaded run; holds at most the smoothing horizon of frames."""
    _kernels.warmup()
    me, mc, ic = MotionEstimator(cfg), MotionCompensator(cfg), ImageComposer(cfg)
    t0 = time.perf_counter()
    last = None
    for frame in source:
        last = _check_order(last, frame)
        for f, c in mc.push(frame, me.process(frame)):
            sink(ic.compose(f, c))
    if me.count < 2:
        raise InvalidInputError(f"need at least 2 frames, got {me.count}")
    for f, c in mc.finish():
        sink(ic.compose(f, c))
    summary = summarize(_telemetry("offline", cfg, time.perf_counter() - t0, me, mc, ic))
    summary.trajectory = mc.trajectory
    return summary


@dataclass(frozen=True)
class StageMessage:
    frame_index: int
    payload: object


class _EndOfStream:
    def __repr__(self):
        return "<end of stream>"


END_OF_STREAM = _EndOfStream()


@dataclass(frozen=True)
class StageFailure:
    stage: str
    error: BaseException


class _Channel:
    """Bounded FIFO with blocking back-pressure that gives up once the run aborts."""

    def __init__(self, capacity: int, abort: threading.Event, poll: float = 0.05):
        self._q: queue.Queue = queue.Queue(maxsize=capacity)
        self._abort = abort
        self._poll = poll
        self.high_water = 0

    def put(self, msg) -> bool:
        while True:
            try:
                self._q.put(msg, timeout=self._poll)
                self.high_water = max(self.high_water, self._q.qsize())
                return True
            except queue.Full:
                if self._abort.is_set():
                    return False

    def put_final(self, msg) -> None:
        """Deliver a terminal marker, dropping queued data if the run is aborting."""
        while not self.put(msg):
            try:
                self._q.get_nowait()
            except queue.Empty:
                pass

    def get(self):
        while True:
            try:
                return self._q.get(timeout=self._poll)
            except queue.Empty:
                if self._abort.is_set() and self._q.empty():
                    return StageFailure("aborted", PipelineError("run aborted"))


def _throttled(source: Iterable[GrayFrame], fps: float | None) -> Iterator[GrayFrame]:
    if not fps:
        yield from source
        return
    period = 1.0 / fps
    due = time.perf_counter()
    for frame in source:
        delay = due - time.perf_counter()
        if delay > 0:
            time.sleep(delay)
        due += period
        yield frame


def run_streaming(
    source: Iterable[GrayFrame],
    cfg: StabConfig,
    sink: Sink,
    realtime_fps: float | None = None,
) -> RunSummary:
    """Run ME, MC and IC as three threads joined by bounded channels.

    Any stage failure sets a shared abort flag and sends a failure marker
    downstream; every thread then exits and :class:`PipelineError` is raised
    with the first failure chained.
    """
    _kernels.warmup()
    me, mc, ic = MotionEstimator(cfg), MotionCompensator(cfg), ImageComposer(cfg)
    abort = threading.Event()
    me_to_mc = _Channel(cfg.queue_capacity, abort)
    mc_to_ic = _Channel(cfg.queue_capacity, abort)
    failures: list[StageFailure] = []
    lock = threading.Lock()

    def fail(stage: str, exc: BaseException) -> StageFailure:
        marker = StageFailure(stage, exc)
        with lock:
            failures.append(marker)
        abort.set()
        return marker

    def estimation():
        last = None
        try:
            for frame in _throttled(source, realtime_fps):
                if abort.is_set():
                    return
                last = _check_order(last, frame)
                delta = me.process(frame)
                if not me_to_mc.put(StageMessage(frame.index, (frame, delta))):
                    return
            if me.count < 2:
                raise InvalidInputError(f"need at least 2 frames, got {me.count}")
            me_to_mc.put(END_OF_STREAM)
        except BaseException as exc:  # noqa: BLE001 - forwarded to the caller
            me_to_mc.put_final(fail("motion estimation", exc))

    def compensation():
        try:
            while True:
                msg = me_to_mc.get()
                if isinstance(msg, StageFailure):
                    mc_to_ic.put_final(msg)
                    return
                ready = mc.finish() if msg is END_OF_STREAM else mc.push(*msg.payload)
                for f, c in ready:
                    if not mc_to_ic.put(StageMessage(f.index, (f, c))):
                        return
                if msg is END_OF_STREAM:
                    mc_to_ic.put(END_OF_STREAM)
                    return
        except BaseException as exc:  # noqa: BLE001
            mc_to_ic.put_final(fail("motion compensation", exc))

    def composition():
        try:
            while True:
                msg = mc_to_ic.get()
                if isinstance(msg, StageFailure) or msg is END_OF_STREAM:
                    return
                sink(ic.compose(*msg.payload))
        except BaseException as exc:  # noqa: BLE001
            fail("image composition", exc)

    t0 = time.perf_counter()
    threads = [
        threading.Thread(target=fn, name=name, daemon=True)
        for fn, name in ((estimation, "uavstab-me"), (compensation, "uavstab-mc"), (composition, "uavstab-ic"))
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.perf_counter() - t0
    if failures:
        first = failures[0]
        raise PipelineError(f"{first.stage} failed: {first.error}") from first.error
    summary = summarize(_telemetry("streaming", cfg, wall, me, mc, ic))
    summary.trajectory = mc.trajectory
    return summary


def run(source: Iterable[GrayFrame], cfg: StabConfig, sink: Sink, **kw) -> RunSummary:
    if cfg.mode == "streaming":
        return run_streaming(source, cfg, sink, **kw)
    return run_offline(source, cfg, sink)
