"""Synthetic jittered sequences with known camera paths, and quality scoring."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidInputError, UnusableFixtureError
from .features import DetectConfig, detect_corner_array
from .flow import FlowConfig, Tracker
from .image_core import GrayFrame, warp_plane
from .motion import DeltaParams, Kind, SimilarityTransform, estimate_similarity, extract_delta

PARAMS = ("dx", "dy", "da", "dls")


def textured_image(width: int, height: int, seed: int = 0) -> np.ndarray:
    """Multi-octave filtered noise with a few flat shapes laid over it.

    The octave mix gives structure at every pyramid scale, which is what
    coarse-to-fine tracking needs to follow large shifts.
    """
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width))
    for sigma in (1.0, 2.0, 4.0, 8.0, 16.0):
        img += sigma * gaussian_filter(rng.normal(size=(height, width)), sigma, mode="wrap")
    img = (img - img.mean()) / img.std() * 40.0 + 128.0
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(max(4, (width * height) // 12000)):
        level = rng.uniform(20, 235)
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        size = rng.uniform(6, 0.08 * min(width, height) + 6)
        if rng.random() < 0.5:
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < size**2
        else:
            mask = (np.abs(xx - cx) < size) & (np.abs(yy - cy) < 0.6 * size)
        img[mask] = 0.5 * img[mask] + 0.5 * level
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class JitterSpec:
    """Camera path = accumulated drift + i.i.d. Gaussian jitter per parameter.

    ``drift`` is a per-frame ``(dx, dy)`` or ``(dx, dy, da, dls)`` step of the
    intended camera motion. With ``integer_jitter`` the translations are
    rounded to whole pixels and rotation/scale jitter is dropped.
    """

    width: int = 320
    height: int = 240
    frames: int = 120
    jitter_std: float = 4.0
    angle_std: float = 0.0
    scale_jitter_std: float = 0.0
    drift: tuple[float, ...] = (0.0, 0.0)
    seed: int = 0
    pad: int = 48
    integer_jitter: bool = False
    base: np.ndarray | None = field(default=None, repr=False, compare=False)
    min_corners: int = 50

    def __post_init__(self):
        if min(self.jitter_std, self.angle_std, self.scale_jitter_std) < 0:
            raise InvalidInputError("jitter standard deviations must be >= 0")
        if self.frames < 2:
            raise InvalidInputError("need at least 2 frames")
        if len(self.drift) not in (2, 4):
            raise InvalidInputError("drift must have 2 or 4 components")


@dataclass
class SyntheticSequence:
    spec: JitterSpec
    canvas: np.ndarray
    poses: np.ndarray
    truth: list[DeltaParams]

    def content_transform(self, i: int) -> SimilarityTransform:
        return camera_pose(self.poses[i], self.spec.width, self.spec.height).inverse()

    def frames(self) -> Iterator[GrayFrame]:
        p = self.spec.pad
        shift = SimilarityTransform(-p, -p, 0.0, 1.0, Kind.SIMILARITY)
        shape = (self.spec.height, self.spec.width)
        for i in range(self.spec.frames):
            # canvas coordinates are frame coordinates offset by the pad
            t = self.content_transform(i).compose(shift)
            yield GrayFrame(warp_plane(self.canvas, t, out_shape=shape), i)

    def __iter__(self):
        return self.frames()


def camera_pose(params: np.ndarray, width: int, height: int) -> SimilarityTransform:
    """Pose ``(x, y, angle, log-scale)`` with rotation/scale about the frame centre."""
    x, y, a, ls = (float(v) for v in params)
    s = math.exp(ls)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    c, sn = s * math.cos(a), s * math.sin(a)
    tx = cx - (c * cx - sn * cy) + x
    ty = cy - (sn * cx + c * cy) + y
    return SimilarityTransform(tx, ty, a, s, Kind.SIMILARITY)


def _camera_params(spec: JitterSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    n = spec.frames
    drift = np.zeros(4)
    drift[: len(spec.drift)] = spec.drift
    path = np.outer(np.arange(n), drift)
    jitter = np.column_stack([
        rng.normal(0.0, spec.jitter_std, n) if spec.jitter_std else np.zeros(n),
        rng.normal(0.0, spec.jitter_std, n) if spec.jitter_std else np.zeros(n),
        rng.normal(0.0, spec.angle_std, n) if spec.angle_std else np.zeros(n),
        rng.normal(0.0, spec.scale_jitter_std, n) if spec.scale_jitter_std else np.zeros(n),
    ])
    poses = path + jitter
    if spec.integer_jitter:
        poses[:, :2] = np.rint(poses[:, :2])
        poses[:, 2:] = 0.0
    return poses


def generate(spec: JitterSpec) -> SyntheticSequence:
    """Build a synthetic sequence; iterate it for frames, read ``.truth`` for deltas.

    ``truth[i]`` is the content motion from frame ``i - 1`` to ``i`` (``truth[0]``
    is the zero reference delta).
    """
    p = spec.pad
    if spec.base is not None:
        base = np.asarray(spec.base, dtype=np.uint8)
        if base.shape != (spec.height + 2 * p, spec.width + 2 * p):
            base = _fit_base(base, spec.width + 2 * p, spec.height + 2 * p)
    else:
        base = textured_image(spec.width + 2 * p, spec.height + 2 * p, spec.seed)
    view = GrayFrame(base[p : p + spec.height, p : p + spec.width])
    pts, _ = detect_corner_array(view, DetectConfig(max_corners=max(8, spec.min_corners)))
    if len(pts) < spec.min_corners:
        raise UnusableFixtureError(
            f"base image yields only {len(pts)} corners, need {spec.min_corners}"
        )
    poses = _camera_params(spec)
    seq = SyntheticSequence(spec, base, poses, [DeltaParams()])
    for i in range(1, spec.frames):
        step = seq.content_transform(i).compose(seq.content_transform(i - 1).inverse())
        seq.truth.append(extract_delta(step))
    return seq


def _fit_base(base: np.ndarray, width: int, height: int) -> np.ndarray:
    """Tile or crop an arbitrary base image to the padded canvas size."""
    reps = (math.ceil(height / base.shape[0]), math.ceil(width / base.shape[1]))
    return np.ascontiguousarray(np.tile(base, reps)[:height, :width])


def interframe_psnr(frames: Iterable[GrayFrame], crop_ratio: float = 0.04) -> list[float]:
    """PSNR between consecutive frames over the central region; ``inf`` when identical."""
    out = []
    prev = None
    for f in frames:
        h, w = f.height, f.width
        my, mx = int(round(crop_ratio * h)), int(round(crop_ratio * w))
        cur = f.pixels[my : h - my, mx : w - mx].astype(np.float64)
        if prev is not None:
            mse = float(np.mean((cur - prev) ** 2))
            out.append(math.inf if mse == 0.0 else 10.0 * math.log10(255.0**2 / mse))
        prev = cur
    if prev is None or not out:
        raise InvalidInputError("PSNR needs at least 2 frames")
    return out


def finite_mean(values: Sequence[float]) -> float:
    vals = [v for v in values if math.isfinite(v)]
    return float(np.mean(vals)) if vals else math.inf


def measure_deltas(
    frames: Iterable[GrayFrame],
    flow_cfg: FlowConfig = FlowConfig(),
    detect_cfg: DetectConfig = DetectConfig(),
) -> list[DeltaParams]:
    """Independent similarity-only motion measurement used to score a stream."""
    tracker = Tracker(flow_cfg, detect_cfg)
    deltas = []
    for pos, f in enumerate(frames):
        tracks = tracker.advance(GrayFrame(f.pixels, pos))
        if pos == 0:
            deltas.append(DeltaParams())
        elif tracks is None:
            deltas.append(DeltaParams.skip(Kind.SIMILARITY))
        else:
            deltas.append(extract_delta(estimate_similarity(tracks)))
    return deltas


def jitter_energy(deltas: Sequence[DeltaParams]) -> dict[str, float]:
    """Per-parameter std of the frame-to-frame motion, skipping reference/skipped frames."""
    rows = np.array([d.as_array() for d in deltas[1:] if not d.skipped])
    if len(rows) == 0:
        return {k: math.nan for k in PARAMS}
    return {k: float(v) for k, v in zip(PARAMS, rows.std(axis=0))}


@dataclass
class EvalReport:
    mean_psnr_before: float
    mean_psnr_after: float
    jitter_energy_before: dict[str, float]
    jitter_energy_after: dict[str, float]
    truth_recovery_rmse: dict[str, float] | None
    frames_skipped: int

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v

        return {k: clean(v) for k, v in asdict(self).items()}


def truth_rmse(truth: Sequence[DeltaParams], estimated: Sequence[DeltaParams]) -> dict[str, float]:
    if len(truth) != len(estimated):
        raise InvalidInputError(f"truth has {len(truth)} entries, estimate has {len(estimated)}")
    pairs = [(t.as_array(), e.as_array()) for t, e in zip(truth[1:], estimated[1:]) if not e.skipped]
    if not pairs:
        return {k: math.nan for k in PARAMS}
    diff = np.array([t - e for t, e in pairs])
    return {k: float(v) for k, v in zip(PARAMS, np.sqrt(np.mean(diff**2, axis=0)))}


def score(
    original: Sequence[GrayFrame],
    stabilized: Sequence[GrayFrame],
    truth: Sequence[DeltaParams] | None = None,
    estimated: Sequence[DeltaParams] | None = None,
    crop_ratio: float = 0.04,
    flow_cfg: FlowConfig = FlowConfig(),
    detect_cfg: DetectConfig = DetectConfig(),
) -> EvalReport:
    original, stabilized = list(original), list(stabilized)
    if len(original) != len(stabilized):
        raise InvalidInputError(
            f"original has {len(original)} frames, stabilized has {len(stabilized)}"
        )
    before = measure_deltas(original, flow_cfg, detect_cfg)
    after = measure_deltas(stabilized, flow_cfg, detect_cfg)
    rmse = None
    skipped = sum(d.skipped for d in after)
    if truth is not None and estimated is not None:
        rmse = truth_rmse(truth, estimated)
        skipped = sum(d.skipped for d in estimated)
    return EvalReport(
        mean_psnr_before=finite_mean(interframe_psnr(original, crop_ratio)),
        mean_psnr_after=finite_mean(interframe_psnr(stabilized, crop_ratio)),
        jitter_energy_before=jitter_energy(before),
        jitter_energy_after=jitter_energy(after),
        truth_recovery_rmse=rmse,
        frames_skipped=int(skipped),
    )
