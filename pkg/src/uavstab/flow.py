"""Pyramidal Lucas-Kanade tracking with forward-backward weeding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, InvalidInputError, SequenceError
from .features import DetectConfig, detect_corner_array
from .image_core import GrayFrame, Pyramid, build_pyramid


@dataclass(frozen=True)
class FlowConfig:
    window_radius: int = 10
    max_levels: int = 4
    max_iterations: int = 30
    epsilon: float = 0.01
    fb_threshold: float = 0.5
    redetect_interval: int = 5
    min_tracks: int = 8

    def __post_init__(self):
        for name in ("window_radius", "max_levels", "max_iterations", "redetect_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epsilon <= 0 or self.fb_threshold <= 0:
            raise ConfigError("epsilon and fb_threshold must be positive")
        if self.min_tracks < 4:
            raise ConfigError("min_tracks must be >= 4")


@dataclass(frozen=True, eq=False)
class TrackSet:
    """Index-aligned point pairs between frame ``frame_index - 1`` and ``frame_index``."""

    prev_points: np.ndarray
    cur_points: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        prev = np.asarray(self.prev_points, dtype=np.float64).reshape(-1, 2)
        cur = np.asarray(self.cur_points, dtype=np.float64).reshape(-1, 2)
        if prev.shape != cur.shape:
            raise InvalidInputError("prev and cur point lists differ in length")
        object.__setattr__(self, "prev_points", prev)
        object.__setattr__(self, "cur_points", cur)

    def __len__(self) -> int:
        return len(self.prev_points)


def track_lk(
    prev: Pyramid, cur: Pyramid, points: np.ndarray, cfg: FlowConfig = FlowConfig()
) -> tuple[np.ndarray, np.ndarray]:
    """Track ``points`` from ``prev`` into ``cur``.

    Returns ``(new_points[N, 2], status[N])``. Each level's flow, doubled,
    seeds the next finer level.
    """
    if prev.level_count != cur.level_count or any(
        a.shape != b.shape for a, b in zip(prev.levels, cur.levels)
    ):
        raise InvalidInputError("pyramids have different geometry")
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    if len(pts) == 0:
        return pts.copy(), np.zeros(0, dtype=bool)
    radius = cfg.window_radius
    min_eig = 1e-4 * (2 * radius + 1) ** 2
    flow = np.zeros_like(pts)
    top = min(prev.level_count, cfg.max_levels) - 1
    ok = np.ones(len(pts), dtype=bool)
    for level in range(top, -1, -1):
        scale = 0.5**level
        gx, gy = prev.grads[level]
        flow, ok, _ = _kernels.lk_level(
            prev.levels[level], gx, gy, cur.levels[level],
            pts * scale, flow, radius, cfg.max_iterations, cfg.epsilon, min_eig, level == 0,
        )
        if level:
            flow = flow * 2.0
    new_pts = pts + flow
    ok &= np.isfinite(new_pts).all(axis=1)
    return new_pts, ok


def weed_tracks(
    prev: Pyramid,
    cur: Pyramid,
    prev_points: np.ndarray,
    cur_points: np.ndarray,
    cfg: FlowConfig = FlowConfig(),
    status: np.ndarray | None = None,
    frame_index: int = 0,
) -> TrackSet:
    """Keep pairs whose backward track lands within ``fb_threshold`` of the origin."""
    prev_points = np.asarray(prev_points, dtype=np.float64).reshape(-1, 2)
    cur_points = np.asarray(cur_points, dtype=np.float64).reshape(-1, 2)
    keep = np.ones(len(prev_points), dtype=bool) if status is None else np.asarray(status, bool).copy()
    keep &= np.isfinite(cur_points).all(axis=1)
    idx = np.flatnonzero(keep)
    back, back_ok = track_lk(cur, prev, cur_points[idx], cfg)
    fb_err = np.hypot(*(back - prev_points[idx]).T)
    good = idx[back_ok & (fb_err <= cfg.fb_threshold)]
    return TrackSet(prev_points[good], cur_points[good], frame_index)


def forward_backward_error(prev: Pyramid, cur: Pyramid, tracks: TrackSet, cfg: FlowConfig) -> np.ndarray:
    back, _ = track_lk(cur, prev, tracks.cur_points, cfg)
    return np.hypot(*(back - tracks.prev_points).T)


@dataclass
class Tracker:
    """Carries the active corner set from frame to frame.

    Fresh corners replace the active set on frame 0 and then every
    ``redetect_interval`` frames; in between, the weeded positions in the
    current frame become the points tracked into the next.
    """

    flow_cfg: FlowConfig = field(default_factory=FlowConfig)
    detect_cfg: DetectConfig = field(default_factory=DetectConfig)
    last_index: int | None = None
    frames_since_detection: int = 0
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    pyramid: Pyramid | None = None
    detection_frames: list[int] = field(default_factory=list)

    def _detect(self, frame: GrayFrame) -> None:
        self.points, _ = detect_corner_array(frame, self.detect_cfg)
        self.frames_since_detection = 0
        self.detection_frames.append(frame.index)

    def advance(self, frame: GrayFrame) -> TrackSet | None:
        """Consume the next frame.

        Returns the weeded tracks from the previous frame, or ``None`` when
        there is no previous frame or fewer than ``min_tracks`` pairs survive.
        """
        if self.last_index is not None and frame.index <= self.last_index:
            raise SequenceError(f"frame {frame.index} arrived after frame {self.last_index}")
        pyr = build_pyramid(frame, self.flow_cfg.max_levels)
        tracks = None
        if self.pyramid is None:
            self.pyramid = pyr
            self.last_index = frame.index
            self._detect(frame)
            return None
        if len(self.points):
            cur_pts, status = track_lk(self.pyramid, pyr, self.points, self.flow_cfg)
            tracks = weed_tracks(self.pyramid, pyr, self.points, cur_pts, self.flow_cfg, status, frame.index)
            self.points = tracks.cur_points
        self.pyramid = pyr
        self.last_index = frame.index
        self.frames_since_detection += 1
        if self.frames_since_detection >= self.flow_cfg.redetect_interval:
            self._detect(frame)
        if tracks is None or len(tracks) < self.flow_cfg.min_tracks:
            return None
        return tracks
