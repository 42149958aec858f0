"""Cumulative parameter trajectory, sliding-window smoothing and corrections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotReadyError
from .motion import DeltaParams, Kind, SimilarityTransform


@dataclass(frozen=True)
class SmoothConfig:
    radius: int = 10

    def __post_init__(self):
        if self.radius < 1:
            raise ConfigError("smoothing radius must be >= 1")


@dataclass
class Trajectory:
    """Per-frame deltas and their running sum ``(x, y, angle, log-scale)``.

    Entry ``i`` belongs to frame ``i``; entry 0 is the reference pose and
    holds a zero delta. Call :meth:`close` once the stream has ended so the
    last ``radius`` frames can be smoothed with truncated windows.
    """

    raw_deltas: list[DeltaParams] = field(default_factory=list)
    closed: bool = False
    _cum: np.ndarray = field(default_factory=lambda: np.zeros((64, 4)), repr=False)
    smoothed: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.raw_deltas)

    @property
    def cumulative(self) -> np.ndarray:
        return self._cum[: len(self.raw_deltas)]

    @property
    def last(self) -> int:
        return len(self.raw_deltas) - 1

    def close(self) -> None:
        self.closed = True


def accumulate(traj: Trajectory, d: DeltaParams) -> Trajectory:
    """Append ``d`` and extend the cumulative path (in place; returns ``traj``)."""
    n = len(traj.raw_deltas)
    if n == traj._cum.shape[0]:
        traj._cum = np.concatenate([traj._cum, np.zeros_like(traj._cum)])
    step = d.as_array()
    traj._cum[n] = step if n == 0 else traj._cum[n - 1] + step
    traj.raw_deltas.append(d)
    return traj


def is_ready(traj: Trajectory, i: int, cfg: SmoothConfig) -> bool:
    return 0 <= i <= traj.last and (traj.closed or i + cfg.radius <= traj.last)


def smooth_at(traj: Trajectory, i: int, cfg: SmoothConfig = SmoothConfig()) -> np.ndarray:
    """Mean of the cumulative path over ``[i - r, i + r]``, truncated at the ends."""
    if not is_ready(traj, i, cfg):
        raise NotReadyError(f"frame {i} needs deltas through frame {i + cfg.radius}")
    lo = max(0, i - cfg.radius)
    hi = min(traj.last, i + cfg.radius)
    window = traj.cumulative[lo : hi + 1]
    s = window.sum(axis=0) / window.shape[0]
    traj.smoothed[i] = s
    return s


def correction_vector(traj: Trajectory, i: int, cfg: SmoothConfig = SmoothConfig()) -> np.ndarray:
    s = traj.smoothed.get(i)
    if s is None:
        s = smooth_at(traj, i, cfg)
    return s - traj.cumulative[i]


def correction(traj: Trajectory, i: int, cfg: SmoothConfig = SmoothConfig()) -> SimilarityTransform:
    """Transform taking frame ``i`` from its accumulated pose to the smoothed one."""
    dx, dy, da, dls = correction_vector(traj, i, cfg)
    return SimilarityTransform(float(dx), float(dy), float(da), math.exp(dls), Kind.SIMILARITY)
